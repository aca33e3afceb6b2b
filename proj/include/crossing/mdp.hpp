#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace crossing {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Finite tabular MDP. Non-terminal states collect R(s, a) and continue;
/// terminal states have a fixed value and a designated policy action.
class TabularMdp {
 public:
  struct Transition {
    std::size_t next;
    double probability;
  };

  TabularMdp(std::size_t states, std::size_t actions, double gamma);

  std::size_t states() const noexcept { return states_; }
  std::size_t actions() const noexcept { return actions_; }
  double gamma() const noexcept { return gamma_; }

  void add_transition(std::size_t s, std::size_t a, std::size_t next, double probability);
  void set_reward(std::size_t s, std::size_t a, double reward);
  void set_terminal(std::size_t s, double value, std::size_t action);

  const std::vector<Transition>& transitions(std::size_t s, std::size_t a) const {
    return transitions_[s * actions_ + a];
  }
  double reward(std::size_t s, std::size_t a) const { return rewards_[s * actions_ + a]; }
  bool terminal(std::size_t s) const { return terminal_[s]; }
  double terminal_value(std::size_t s) const { return terminal_value_[s]; }
  std::size_t terminal_action(std::size_t s) const { return terminal_action_[s]; }

  /// Checks that rewards are finite and each non-terminal row sums to one.
  void validate() const;

 private:
  std::size_t states_;
  std::size_t actions_;
  double gamma_;
  std::vector<std::vector<Transition>> transitions_;
  std::vector<double> rewards_;
  std::vector<bool> terminal_;
  std::vector<double> terminal_value_;
  std::vector<std::size_t> terminal_action_;
};

struct MdpSolution {
  std::vector<double> values;
  std::vector<std::size_t> policy;
  std::vector<double> residuals;  // max-norm Bellman residual per sweep
};

/// Synchronous value iteration until the max-norm residual drops below `tol`,
/// then greedy policy extraction. Ties go to the lowest action index.
/// Throws SolverError when `max_sweeps` is exhausted.
MdpSolution mdp_solve(const TabularMdp& model, double tol, std::size_t max_sweeps = 10000);

}  // namespace crossing
