#pragma once

#include <concepts>
#include <cstddef>

#include "pcreg/cloud.hpp"
#include "pcreg/lie.hpp"

namespace pcreg {

/// A global feature function phi(g . P). The transform is applied by the
/// extractor itself so tiled backends can fuse it into their first stage.
template <typename E>
concept FeatureExtractor = requires(const E& e, const PointCloud& cloud, const RigidTransform& g,
                                    const ApplyMode& mode) {
  { e.phi(cloud, g, mode) } -> std::convertible_to<FeatureVector>;
};

/// Wraps an extractor and counts how many features it produced.
template <FeatureExtractor E>
class CountingExtractor {
 public:
  explicit CountingExtractor(const E& inner) : inner_(&inner) {}

  [[nodiscard]] FeatureVector phi(const PointCloud& cloud, const RigidTransform& g,
                                  const ApplyMode& mode) const {
    ++calls_;
    return inner_->phi(cloud, g, mode);
  }

  [[nodiscard]] std::size_t calls() const { return calls_; }
  void reset() { calls_ = 0; }

 private:
  const E* inner_;
  mutable std::size_t calls_ = 0;
};

}  // namespace pcreg
