#ifndef VERSE_ERROR_HPP
#define VERSE_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace verse {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    DimensionError(const std::string& what, std::size_t expected, std::size_t actual)
        : Error(what + ": expected " + std::to_string(expected) + ", got " + std::to_string(actual)),
          expected_(expected),
          actual_(actual) {}

    [[nodiscard]] std::size_t expected() const noexcept { return expected_; }
    [[nodiscard]] std::size_t actual() const noexcept { return actual_; }

private:
    std::size_t expected_;
    std::size_t actual_;
};

inline void require_dim(const char* what, std::size_t expected, std::size_t actual) {
    if (expected != actual) {
        throw DimensionError(what, expected, actual);
    }
}

}  // namespace verse

#endif  // VERSE_ERROR_HPP
