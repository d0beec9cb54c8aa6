#include "glossalign/optim.hpp"

#include <cmath>

namespace glossalign {

std::vector<ParamGroup> default_groups(const ContextHeadParams& params, double lr_base,
                                       double lr_custom, double weight_decay) {
  std::vector<ParamGroup> groups(2);
  groups[0].name = "base";
  groups[0].lr = lr_base;
  groups[0].weight_decay = weight_decay;
  groups[1].name = "custom";
  groups[1].lr = lr_custom;
  groups[1].weight_decay = weight_decay;
  for (std::size_t i = 0; i < params.tensors.size(); ++i) groups[1].tensor_indices.push_back(i);
  return groups;
}

AdamWState AdamWState::for_params(const ContextHeadParams& params) {
  AdamWState state;
  state.m.reserve(params.tensors.size());
  state.v.reserve(params.tensors.size());
  for (const auto& t : params.tensors) {
    state.m.emplace_back(t.rows(), t.cols());
    state.v.emplace_back(t.rows(), t.cols());
  }
  return state;
}

void adamw_step(ContextHeadParams& params, const HeadGradients& grads, AdamWState& state,
                const std::vector<ParamGroup>& groups, const AdamConfig& cfg) {
  if (grads.size() != params.tensors.size() || state.m.size() != params.tensors.size())
    throw Error(Err::DimMismatch, "gradient/state tensor count");
  for (const auto& g : grads)
    if (!g.is_finite()) throw Error(Err::NonFiniteGradient, "gradient contains NaN/Inf");

  std::vector<char> seen(params.tensors.size(), 0);
  for (const auto& group : groups)
    for (std::size_t idx : group.tensor_indices) {
      if (idx >= seen.size() || seen[idx])
        throw Error(Err::ConfigInvalid, "tensor not assigned to exactly one group");
      seen[idx] = 1;
    }
  for (char s : seen)
    if (!s) throw Error(Err::ConfigInvalid, "tensor not assigned to exactly one group");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);

  for (const auto& group : groups) {
    for (std::size_t idx : group.tensor_indices) {
      Vec& theta = params.tensors[idx].data();
      const Vec& g = grads[idx].data();
      Vec& m = state.m[idx].data();
      Vec& v = state.v[idx].data();
      for (std::size_t j = 0; j < theta.size(); ++j) {
        m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
        v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
        const double m_hat = m[j] / bc1;
        const double v_hat = v[j] / bc2;
        theta[j] -= group.lr * m_hat / (std::sqrt(v_hat) + cfg.eps) +
                    group.lr * group.weight_decay * theta[j];
      }
    }
  }
}

void PlateauConfig::validate() const {
  if (!(factor > 0.0 && factor < 1.0)) throw Error(Err::ConfigInvalid, "plateau factor in (0,1)");
  if (min_lr < 0.0) throw Error(Err::ConfigInvalid, "min_lr must be >= 0");
}

void plateau_update(PlateauState& state, double epoch_metric, std::vector<ParamGroup>& groups) {
  state.config.validate();
  if (!std::isfinite(epoch_metric)) throw Error(Err::NonFiniteInput, "plateau metric");
  if (epoch_metric < state.best * (1.0 - state.config.threshold)) {
    state.best = epoch_metric;
    state.bad_epochs = 0;
    return;
  }
  state.bad_epochs += 1;
  if (state.bad_epochs > state.config.patience) {
    for (auto& group : groups)
      group.lr = std::max(group.lr * state.config.factor, state.config.min_lr);
    state.bad_epochs = 0;
  }
}

}  // namespace glossalign
