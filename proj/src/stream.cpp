#include "verse/stream.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "verse/error.hpp"

namespace verse {

std::string_view to_string(Split split) { return split == Split::train ? "train" : "test"; }

void Dataset::validate() const {
    if (num_classes < 2) throw Error("dataset needs at least 2 classes");
    if (dim == 0) throw Error("dataset feature dimension must be >= 1");
    std::map<std::int64_t, std::vector<std::uint32_t>> frames;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        require_dim("dataset sample feature length", dim, s.z.size());
        if (s.label < 0 || static_cast<std::size_t>(s.label) >= num_classes) {
            throw Error("dataset sample " + std::to_string(i) + " has label " + std::to_string(s.label) +
                        " outside [0, " + std::to_string(num_classes) + ")");
        }
        for (double v : s.z) {
            if (!std::isfinite(v)) throw Error("dataset sample " + std::to_string(i) + " has a non-finite value");
        }
        frames[s.instance_id].push_back(s.frame_index);
    }
    for (auto& [instance, idx] : frames) {
        std::sort(idx.begin(), idx.end());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (idx[k] != k) {
                throw Error("instance " + std::to_string(instance) + " frame indices are not consecutive from 0");
            }
        }
    }
}

void SyntheticConfig::validate() const {
    if (num_classes < 2) throw Error("synthetic config: num_classes must be >= 2");
    if (instances_per_class < 2) {
        throw Error("synthetic config: instances_per_class must be >= 2 (one train and one test instance)");
    }
    if (frames_per_instance < 1) throw Error("synthetic config: frames_per_instance must be >= 1");
    if (raw_dim < 1) throw Error("synthetic config: raw_dim must be >= 1");
    if (!(class_separation > 0.0)) throw Error("synthetic config: class_separation must be > 0");
    if (instance_spread < 0.0 || temporal_step < 0.0 || noise_scale < 0.0) {
        throw Error("synthetic config: spread, step and noise must be >= 0");
    }
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw Error("synthetic config: test_fraction must be in (0, 1)");
    }
}

TrainTestSplit generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t d = cfg.raw_dim;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

    auto gaussian_vector = [&](double scale) {
        std::vector<double> v(d);
        for (auto& x : v) x = gauss(rng) * scale * inv_sqrt_d;
        return v;
    };

    TrainTestSplit out;
    for (Dataset* ds : {&out.train, &out.test}) {
        ds->num_classes = cfg.num_classes;
        ds->dim = d;
    }
    out.train.split = Split::train;
    out.test.split = Split::test;

    const auto n_test = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(cfg.test_fraction * static_cast<double>(cfg.instances_per_class))), 1,
        cfg.instances_per_class - 1);

    for (std::size_t c = 0; c < cfg.num_classes; ++c) {
        const auto mean = gaussian_vector(cfg.class_separation);
        std::vector<std::size_t> instance_order(cfg.instances_per_class);
        std::iota(instance_order.begin(), instance_order.end(), 0);
        std::shuffle(instance_order.begin(), instance_order.end(), rng);
        const std::set<std::size_t> test_instances(instance_order.begin(), instance_order.begin() + n_test);

        for (std::size_t i = 0; i < cfg.instances_per_class; ++i) {
            const auto instance_id = static_cast<std::int64_t>(c * cfg.instances_per_class + i);
            auto position = gaussian_vector(cfg.instance_spread);
            for (std::size_t k = 0; k < d; ++k) position[k] += mean[k];

            Dataset& target = test_instances.contains(i) ? out.test : out.train;
            for (std::size_t f = 0; f < cfg.frames_per_instance; ++f) {
                if (f > 0) {
                    auto step = gaussian_vector(1.0);
                    double norm = 0.0;
                    for (double v : step) norm += v * v;
                    norm = std::sqrt(norm);
                    for (std::size_t k = 0; k < d; ++k) position[k] += cfg.temporal_step * step[k] / norm;
                }
                FeatureSample s;
                s.z = gaussian_vector(cfg.noise_scale);
                for (std::size_t k = 0; k < d; ++k) s.z[k] += position[k];
                s.label = static_cast<int>(c);
                s.instance_id = instance_id;
                s.frame_index = static_cast<std::uint32_t>(f);
                target.samples.push_back(std::move(s));
            }
        }
    }
    return out;
}

std::string_view to_string(Scheme scheme) {
    switch (scheme) {
        case Scheme::iid:
            return "iid";
        case Scheme::class_iid:
            return "class_iid";
        case Scheme::instance:
            return "instance";
        case Scheme::class_instance:
            return "class_instance";
    }
    return "iid";
}

Scheme parse_scheme(std::string_view name) {
    if (name == "iid") return Scheme::iid;
    if (name == "class_iid") return Scheme::class_iid;
    if (name == "instance") return Scheme::instance;
    if (name == "class_instance") return Scheme::class_instance;
    throw Error("unknown ordering scheme '" + std::string(name) + "'");
}

bool is_class_contiguous(Scheme scheme) { return scheme == Scheme::class_iid || scheme == Scheme::class_instance; }

std::string_view default_policy_name(Scheme scheme) {
    return scheme == Scheme::instance || scheme == Scheme::class_instance ? "reservoir" : "class_balanced";
}

namespace {

// Groups sample indices by key, groups in ascending key order.
template <typename Key>
std::vector<std::vector<std::size_t>> group_by(const Dataset& ds, Key key) {
    std::map<decltype(key(ds.samples.front())), std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) groups[key(ds.samples[i])].push_back(i);
    std::vector<std::vector<std::size_t>> out;
    out.reserve(groups.size());
    for (auto& [k, members] : groups) out.push_back(std::move(members));
    return out;
}

void sort_by_frame(const Dataset& ds, std::vector<std::size_t>& indices) {
    std::sort(indices.begin(), indices.end(),
              [&](std::size_t a, std::size_t b) { return ds.samples[a].frame_index < ds.samples[b].frame_index; });
}

}  // namespace

StreamSchedule make_schedule(const Dataset& train, Scheme scheme, std::uint64_t seed) {
    if (train.empty()) throw Error("make_schedule: training split is empty");
    std::mt19937_64 rng(seed);
    StreamSchedule schedule{{}, scheme, seed};
    auto& order = schedule.order;
    order.reserve(train.size());

    auto by_class = [](const FeatureSample& s) { return s.label; };
    auto by_instance = [](const FeatureSample& s) { return s.instance_id; };

    switch (scheme) {
        case Scheme::iid:
            order.resize(train.size());
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            break;
        case Scheme::class_iid: {
            auto classes = group_by(train, by_class);
            std::shuffle(classes.begin(), classes.end(), rng);
            for (auto& members : classes) {
                std::shuffle(members.begin(), members.end(), rng);
                order.insert(order.end(), members.begin(), members.end());
            }
            break;
        }
        case Scheme::instance: {
            auto instances = group_by(train, by_instance);
            std::shuffle(instances.begin(), instances.end(), rng);
            for (auto& frames : instances) {
                sort_by_frame(train, frames);
                order.insert(order.end(), frames.begin(), frames.end());
            }
            break;
        }
        case Scheme::class_instance: {
            auto classes = group_by(train, by_class);
            std::shuffle(classes.begin(), classes.end(), rng);
            for (const auto& members : classes) {
                std::map<std::int64_t, std::vector<std::size_t>> per_instance;
                for (auto i : members) per_instance[train.samples[i].instance_id].push_back(i);
                std::vector<std::vector<std::size_t>> instances;
                for (auto& [id, frames] : per_instance) instances.push_back(std::move(frames));
                std::shuffle(instances.begin(), instances.end(), rng);
                for (auto& frames : instances) {
                    sort_by_frame(train, frames);
                    order.insert(order.end(), frames.begin(), frames.end());
                }
            }
            break;
        }
    }
    return schedule;
}

namespace {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(std::string_view field, std::size_t line, const char* what) {
    T value{};
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    while (first < last && *first == ' ') ++first;
    while (last > first && (last[-1] == ' ' || last[-1] == '\r')) --last;
    auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr != last) {
        throw Error("line " + std::to_string(line) + ": malformed " + what + " '" + std::string(field) + "'");
    }
    return value;
}

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delim, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

void export_features(const Dataset& dataset, const std::filesystem::path& path, const FeatureFormat& format) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    const char d = format.delimiter;
    out << "#verse-features dim=" << dataset.dim << " classes=" << dataset.num_classes
        << " split=" << to_string(dataset.split) << '\n';
    for (const auto& s : dataset.samples) {
        out << s.instance_id << d << s.frame_index << d << s.label;
        for (double v : s.z) out << d << format_double(v);
        out << '\n';
    }
    if (!out) throw Error("write to '" + path.string() + "' failed");
}

Dataset ingest_features(const std::filesystem::path& path, const FeatureFormat& format) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open feature file '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line) || !line.starts_with("#verse-features")) {
        throw Error("line 1: missing '#verse-features' header");
    }
    Dataset ds;
    {
        std::istringstream header(line.substr(std::string_view("#verse-features").size()));
        std::string token;
        bool have_dim = false;
        bool have_classes = false;
        while (header >> token) {
            const auto eq = token.find('=');
            if (eq == std::string::npos) throw Error("line 1: malformed header token '" + token + "'");
            const auto key = token.substr(0, eq);
            const auto value = std::string_view(token).substr(eq + 1);
            if (key == "dim") {
                ds.dim = parse_number<std::size_t>(value, 1, "dim");
                have_dim = true;
            } else if (key == "classes") {
                ds.num_classes = parse_number<std::size_t>(value, 1, "classes");
                have_classes = true;
            } else if (key == "split") {
                if (value == "train") {
                    ds.split = Split::train;
                } else if (value == "test") {
                    ds.split = Split::test;
                } else {
                    throw Error("line 1: unknown split '" + std::string(value) + "'");
                }
            } else {
                throw Error("line 1: unknown header key '" + key + "'");
            }
        }
        if (!have_dim || !have_classes) throw Error("line 1: header must declare dim and classes");
        if (ds.dim == 0) throw Error("line 1: dim must be >= 1");
        if (ds.num_classes < 2) throw Error("line 1: classes must be >= 2");
    }

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_fields(line, format.delimiter);
        if (fields.size() != 3 + ds.dim) {
            throw Error("line " + std::to_string(line_no) + ": expected " + std::to_string(3 + ds.dim) +
                        " fields, got " + std::to_string(fields.size()));
        }
        FeatureSample s;
        s.instance_id = parse_number<std::int64_t>(fields[0], line_no, "instance_id");
        s.frame_index = parse_number<std::uint32_t>(fields[1], line_no, "frame_index");
        s.label = parse_number<int>(fields[2], line_no, "label");
        if (s.label < 0 || static_cast<std::size_t>(s.label) >= ds.num_classes) {
            throw Error("line " + std::to_string(line_no) + ": label " + std::to_string(s.label) + " outside [0, " +
                        std::to_string(ds.num_classes) + ")");
        }
        s.z.reserve(ds.dim);
        for (std::size_t k = 0; k < ds.dim; ++k) {
            const double v = parse_number<double>(fields[3 + k], line_no, "feature value");
            if (!std::isfinite(v)) throw Error("line " + std::to_string(line_no) + ": non-finite feature value");
            s.z.push_back(v);
        }
        ds.samples.push_back(std::move(s));
    }
    ds.validate();
    return ds;
}

Dataset embed(const Dataset& raw, const FrozenExtractor& extractor) {
    require_dim("embed: dataset dim vs extractor raw_dim", extractor.raw_dim(), raw.dim);
    Dataset out;
    out.num_classes = raw.num_classes;
    out.dim = extractor.output_dim();
    out.split = raw.split;
    out.samples.reserve(raw.size());
    for (const auto& s : raw.samples) {
        FeatureSample e = s;
        e.z = extractor.extract(s.z);
        out.samples.push_back(std::move(e));
    }
    return out;
}

}  // namespace verse
