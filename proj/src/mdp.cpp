#include "crossing/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crossing/decision.hpp"

namespace crossing {

namespace {

constexpr double kTieTolerance = 1e-12;

double q_value(const TabularMdp& m, const std::vector<double>& v, std::size_t s, std::size_t a) {
  double expected = 0.0;
  for (const auto& tr : m.transitions(s, a)) expected += tr.probability * v[tr.next];
  return m.reward(s, a) + m.gamma() * expected;
}

}  // namespace

TabularMdp::TabularMdp(std::size_t states, std::size_t actions, double gamma)
    : states_(states),
      actions_(actions),
      gamma_(gamma),
      transitions_(states * actions),
      rewards_(states * actions, 0.0),
      terminal_(states, false),
      terminal_value_(states, 0.0),
      terminal_action_(states, 0) {
  if (states == 0 || actions == 0) throw ContractViolation("MDP needs states and actions");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ContractViolation("gamma must lie in (0, 1)");
}

void TabularMdp::add_transition(std::size_t s, std::size_t a, std::size_t next,
                                double probability) {
  if (s >= states_ || a >= actions_ || next >= states_) {
    throw ContractViolation("transition index out of range");
  }
  if (probability <= 0.0) return;
  auto& row = transitions_[s * actions_ + a];
  for (auto& tr : row) {
    if (tr.next == next) {
      tr.probability += probability;
      return;
    }
  }
  row.push_back({next, probability});
}

void TabularMdp::set_reward(std::size_t s, std::size_t a, double reward) {
  if (s >= states_ || a >= actions_) throw ContractViolation("reward index out of range");
  rewards_[s * actions_ + a] = reward;
}

void TabularMdp::set_terminal(std::size_t s, double value, std::size_t action) {
  if (s >= states_ || action >= actions_) throw ContractViolation("terminal index out of range");
  terminal_[s] = true;
  terminal_value_[s] = value;
  terminal_action_[s] = action;
}

void TabularMdp::validate() const {
  for (std::size_t s = 0; s < states_; ++s) {
    if (terminal_[s]) {
      if (!std::isfinite(terminal_value_[s])) throw ContractViolation("terminal value not finite");
      continue;
    }
    for (std::size_t a = 0; a < actions_; ++a) {
      if (!std::isfinite(reward(s, a))) throw ContractViolation("reward not finite");
      double total = 0.0;
      for (const auto& tr : transitions(s, a)) total += tr.probability;
      if (std::abs(total - 1.0) > 1e-9) {
        throw ContractViolation("transition row of state " + std::to_string(s) +
                                " does not sum to one");
      }
    }
  }
}

MdpSolution mdp_solve(const TabularMdp& model, double tol, std::size_t max_sweeps) {
  if (!(tol > 0.0)) throw ContractViolation("tolerance must be positive");
  model.validate();

  const std::size_t n = model.states();
  MdpSolution sol;
  sol.values.assign(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    if (model.terminal(s)) sol.values[s] = model.terminal_value(s);
  }

  std::vector<double> next(n);
  bool converged = false;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double residual = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (model.terminal(s)) {
        next[s] = sol.values[s];
        continue;
      }
      double best = q_value(model, sol.values, s, 0);
      for (std::size_t a = 1; a < model.actions(); ++a) {
        best = std::max(best, q_value(model, sol.values, s, a));
      }
      next[s] = best;
      residual = std::max(residual, std::abs(best - sol.values[s]));
    }
    sol.values.swap(next);
    sol.residuals.push_back(residual);
    if (residual < tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw SolverError("value iteration did not converge within " + std::to_string(max_sweeps) +
                      " sweeps");
  }

  sol.policy.assign(n, 0);
  for (std::size_t s = 0; s < n; ++s) {
    if (model.terminal(s)) {
      sol.policy[s] = model.terminal_action(s);
      continue;
    }
    std::size_t best_a = 0;
    double best_q = q_value(model, sol.values, s, 0);
    for (std::size_t a = 1; a < model.actions(); ++a) {
      const double q = q_value(model, sol.values, s, a);
      if (q > best_q + kTieTolerance * std::max(1.0, std::abs(best_q))) {
        best_q = q;
        best_a = a;
      }
    }
    sol.policy[s] = best_a;
  }
  return sol;
}

}  // namespace crossing
