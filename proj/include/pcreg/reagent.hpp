#pragma once

// ReAgent: an actor network (or an expert) picks discrete steps per axis and
// the transform is updated in disentangled form for a fixed number of rounds.

#include <Eigen/Core>

#include <concepts>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

#include "pcreg/actions.hpp"
#include "pcreg/cloud.hpp"
#include "pcreg/extractor.hpp"
#include "pcreg/featnet.hpp"
#include "pcreg/lie.hpp"
#include "pcreg/oracle.hpp"
#include "pcreg/quant.hpp"
#include "pcreg/result.hpp"

namespace pcreg::reagent {

inline constexpr Eigen::Index kFc1Width = 512;
inline constexpr Eigen::Index kFc2Width = 256;
inline constexpr Eigen::Index kLogits = 3 * kNumActions;

using Logits = Eigen::Matrix<double, 3, kNumActions, Eigen::RowMajor>;

/// One head: quantized fc1 and fc2 (ReLU after each), full-precision fc3.
struct ActorHead {
  quant::QuantizedLayer fc1;
  quant::QuantizedLayer fc2;
  featnet::DenseLayer fc3;

  [[nodiscard]] Eigen::Index state_dim() const { return fc1.inputs(); }
};

struct FloatActorHead {
  featnet::DenseLayer fc1;
  featnet::DenseLayer fc2;
  featnet::DenseLayer fc3;
};

inline void validate(const ActorHead& h) {
  if (h.fc1.outputs() != kFc1Width || h.fc2.inputs() != kFc1Width || h.fc2.outputs() != kFc2Width ||
      h.fc3.weight.cols() != kFc2Width || h.fc3.weight.rows() != kLogits ||
      h.fc3.bias.size() != kLogits) {
    throw std::invalid_argument("actor head must have layer sizes (512, 256, 33)");
  }
}

inline void validate(const FloatActorHead& h) {
  if (h.fc1.weight.rows() != kFc1Width || h.fc1.bias.size() != kFc1Width ||
      h.fc2.weight.rows() != kFc2Width || h.fc2.weight.cols() != kFc1Width ||
      h.fc2.bias.size() != kFc2Width || h.fc3.weight.rows() != kLogits ||
      h.fc3.weight.cols() != kFc2Width || h.fc3.bias.size() != kLogits) {
    throw std::invalid_argument("actor head must have layer sizes (512, 256, 33)");
  }
}

/// Per-row argmax; among equal maxima the label nearest N_act wins.
[[nodiscard]] inline Labels argmax_labels(const Logits& logits) {
  Labels out{};
  for (int r = 0; r < 3; ++r) {
    int best = kActionHalfWidth;
    for (int k = 1; k <= kActionHalfWidth; ++k) {
      for (int label : {kActionHalfWidth - k, kActionHalfWidth + k}) {
        if (logits(r, label) > logits(r, best)) best = label;
      }
    }
    out[static_cast<std::size_t>(r)] = best;
  }
  return out;
}

struct ActorOutput {
  Logits logits;
  Labels labels;
};

namespace detail {

inline Eigen::Matrix<std::int32_t, Eigen::Dynamic, 1> quantize_vector(const Eigen::VectorXd& x,
                                                                       const quant::ActivationTable& t) {
  Eigen::Matrix<std::int32_t, Eigen::Dynamic, 1> q(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) q[i] = t(x[i]);
  return q;
}

inline Eigen::VectorXd dequantize_relu(const Eigen::Matrix<std::int32_t, Eigen::Dynamic, 1>& z,
                                       const quant::QuantizedLayer& l) {
  const double s = l.combined_scale();
  Eigen::VectorXd y(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double v = quant::dequantize(z[i], l.bias()[i], s);
    y[i] = v > 0.0 ? v : 0.0;
  }
  return y;
}

inline ActorOutput finish(const Eigen::VectorXd& h2, const featnet::DenseLayer& fc3) {
  const Eigen::VectorXd flat = fc3.weight * h2 + fc3.bias;
  ActorOutput out;
  out.logits = Eigen::Map<const Logits>(flat.data());
  out.labels = argmax_labels(out.logits);
  return out;
}

}  // namespace detail

[[nodiscard]] inline ActorOutput actor_forward(const Eigen::VectorXd& state, const ActorHead& head) {
  validate(head);
  if (state.size() != head.state_dim()) {
    throw std::invalid_argument("actor_forward: state has " + std::to_string(state.size()) +
                                " entries, head expects " + std::to_string(head.state_dim()));
  }
  const auto q0 = detail::quantize_vector(state, head.fc1.input_table());
  const Eigen::Matrix<std::int32_t, Eigen::Dynamic, 1> z1 = head.fc1.weights() * q0;
  const auto q1 = detail::quantize_vector(detail::dequantize_relu(z1, head.fc1), head.fc2.input_table());
  const Eigen::Matrix<std::int32_t, Eigen::Dynamic, 1> z2 = head.fc2.weights() * q1;
  return detail::finish(detail::dequantize_relu(z2, head.fc2), head.fc3);
}

[[nodiscard]] inline ActorOutput actor_forward_float(const Eigen::VectorXd& state,
                                                     const FloatActorHead& head) {
  validate(head);
  if (state.size() != head.fc1.weight.cols()) {
    throw std::invalid_argument("actor_forward_float: state dimension mismatch");
  }
  const Eigen::VectorXd h1 = (head.fc1.weight * state + head.fc1.bias).cwiseMax(0.0);
  const Eigen::VectorXd h2 = (head.fc2.weight * h1 + head.fc2.bias).cwiseMax(0.0);
  return detail::finish(h2, head.fc3);
}

/// Seeded random head with float-representable values.
[[nodiscard]] inline FloatActorHead random_float_actor(std::uint64_t seed, Eigen::Index state_dim) {
  std::mt19937_64 rng(seed);
  auto dense = [&](Eigen::Index m, Eigen::Index n) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(m)));
    std::uniform_real_distribution<double> small(-0.05, 0.05);
    featnet::DenseLayer l{Eigen::MatrixXd(n, m), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) l.weight(i, j) = static_cast<float>(normal(rng));
    for (Eigen::Index i = 0; i < n; ++i) l.bias[i] = static_cast<float>(small(rng));
    return l;
  };
  FloatActorHead h;
  h.fc1 = dense(state_dim, kFc1Width);
  h.fc2 = dense(kFc1Width, kFc2Width);
  h.fc3 = dense(kFc2Width, kLogits);
  return h;
}

/// Quantizes fc1/fc2 with identity tables and s_w = max |W|.
[[nodiscard]] inline ActorHead quantize(const FloatActorHead& h, int bits, double s_a1, double s_a2,
                                        int granularity = quant::kDefaultGranularity) {
  validate(h);
  const auto wt = quant::WeightTable::identity(bits, granularity);
  auto scale_of = [](const Eigen::MatrixXd& m) {
    const double s = m.cwiseAbs().maxCoeff();
    return s > 0.0 ? s : 1.0;
  };
  auto fc1 = quant::quantize_layer(h.fc1.weight, h.fc1.bias, scale_of(h.fc1.weight), wt,
                                   quant::ActivationTable::identity(bits, s_a1, granularity));
  auto fc2 = quant::quantize_layer(h.fc2.weight, h.fc2.bias, scale_of(h.fc2.weight), wt,
                                   quant::ActivationTable::identity(bits, s_a2, granularity));
  return ActorHead{std::move(fc1), std::move(fc2), h.fc3};
}

/// Largest fc1 input and largest post-ReLU fc1 output over sample states (columns).
[[nodiscard]] inline std::pair<double, double> calibrate_activation_scales(const FloatActorHead& h,
                                                                          const Eigen::MatrixXd& states) {
  const double s1 = states.maxCoeff();
  const Eigen::MatrixXd h1 =
      ((h.fc1.weight * states).colwise() + h.fc1.bias).cwiseMax(0.0);
  const double s2 = h1.maxCoeff();
  return {s1 > 0.0 ? s1 : 1.0, s2 > 0.0 ? s2 : 1.0};
}

/// What a policy sees at each step.
struct Observation {
  const FeatureVector& source_feature;
  const FeatureVector& template_feature;
  const RigidTransform& current;  // disentangled parameterization
  const Eigen::Vector3d& mu;
};

struct Action {
  Labels translation = kNoOp;
  Labels rotation = kNoOp;
};

template <typename P>
concept Policy = requires(const P& p, const Observation& obs) {
  { p.act(obs) } -> std::convertible_to<Action>;
};

/// Two actor heads fed with (phi(G P_S), phi(P_T)).
class LearnedPolicy {
 public:
  LearnedPolicy(ActorHead translation, ActorHead rotation)
      : translation_(std::move(translation)), rotation_(std::move(rotation)) {
    validate(translation_);
    validate(rotation_);
  }

  [[nodiscard]] Action act(const Observation& obs) const {
    Eigen::VectorXd state(obs.source_feature.size() + obs.template_feature.size());
    state << obs.source_feature, obs.template_feature;
    return {actor_forward(state, translation_).labels, actor_forward(state, rotation_).labels};
  }

  [[nodiscard]] const ActorHead& translation_head() const { return translation_; }
  [[nodiscard]] const ActorHead& rotation_head() const { return rotation_; }

 private:
  ActorHead translation_;
  ActorHead rotation_;
};

/// Converts a standard-form transform to the disentangled parameterization about mu.
[[nodiscard]] inline RigidTransform to_disentangled(const RigidTransform& g, const Eigen::Vector3d& mu) {
  return g.with_translation(g.translation() + g.rotation() * mu - mu);
}

[[nodiscard]] inline RigidTransform to_standard(const RigidTransform& g, const Eigen::Vector3d& mu) {
  return g.with_translation(ApplyMode::disentangled(mu).effective_translation(g));
}

/// Greedy expert that knows the ground-truth transform (standard form).
class ExpertPolicy {
 public:
  explicit ExpertPolicy(RigidTransform target) : target_(std::move(target)) {}

  [[nodiscard]] Action act(const Observation& obs) const {
    const RigidTransform goal = to_disentangled(target_, obs.mu);
    return {oracle::expert_action(obs.current, goal, oracle::Head::translation),
            oracle::expert_action(obs.current, goal, oracle::Head::rotation)};
  }

 private:
  RigidTransform target_;
};

struct ReAgentOptions {
  int max_iters = 10;
};

/// Runs exactly max_iters rounds. The returned transforms are in standard form.
template <FeatureExtractor E, Policy P>
[[nodiscard]] RegistrationResult register_clouds(const PointCloud& source, const PointCloud& tmpl,
                                                 const E& ex, const P& policy,
                                                 const ReAgentOptions& opts = {}) {
  if (opts.max_iters < 1) throw std::invalid_argument("ReAgent max_iters must be >= 1");
  require_valid_cloud(source, "source cloud");
  require_valid_cloud(tmpl, "template cloud");

  const Eigen::Vector3d mu = centroid(source);
  const ApplyMode mode = ApplyMode::disentangled(mu);
  const ActionTable& table = ActionTable::standard();
  const FeatureVector phi_t = ex.phi(tmpl, RigidTransform::identity(), ApplyMode::standard());

  RegistrationResult result;
  RigidTransform g = RigidTransform::identity();
  for (int i = 1; i <= opts.max_iters; ++i) {
    const FeatureVector phi_s = ex.phi(source, g, mode);
    const Action a = policy.act(Observation{phi_s, phi_t, g, mu});
    g = update_transform(g, a.translation, a.rotation, table);

    Vector6d step;
    step << table.step(a.rotation[0]), table.step(a.rotation[1]), table.step(a.rotation[2]),
        table.translation(a.translation);
    result.iterations = i;
    result.twist_norms.push_back(step.norm());
    result.transforms.push_back(to_standard(g, mu));
  }
  result.G = to_standard(g, mu);
  return result;
}

}  // namespace pcreg::reagent
