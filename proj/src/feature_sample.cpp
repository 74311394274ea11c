#include "verse/feature_sample.hpp"

#include "verse/error.hpp"

namespace verse {

Batch make_batch(std::span<const FeatureSample> samples) {
    if (samples.empty()) throw Error("make_batch: no samples");
    const std::size_t dim = samples.front().z.size();
    Batch batch;
    batch.inputs.resize(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(dim));
    batch.labels.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        require_dim("make_batch: embedding length", dim, samples[i].z.size());
        for (std::size_t j = 0; j < dim; ++j) {
            batch.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = samples[i].z[j];
        }
        batch.labels.push_back(samples[i].label);
    }
    return batch;
}

}  // namespace verse
