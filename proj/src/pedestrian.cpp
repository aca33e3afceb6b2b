#include "crossing/pedestrian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace crossing {

std::string_view to_string(PedestrianSourceKind kind) noexcept {
  switch (kind) {
    case PedestrianSourceKind::Sfm:
      return "sfm";
    case PedestrianSourceKind::Mdp:
      return "mdp";
    case PedestrianSourceKind::Scripted:
      return "scripted";
    case PedestrianSourceKind::External:
      return "external";
  }
  return "external";
}

PedestrianSourceKind pedestrian_kind_from_string(std::string_view text) {
  if (text == "sfm") return PedestrianSourceKind::Sfm;
  if (text == "mdp") return PedestrianSourceKind::Mdp;
  if (text == "scripted") return PedestrianSourceKind::Scripted;
  if (text == "external") return PedestrianSourceKind::External;
  throw ConfigError("unknown pedestrian model '" + std::string(text) + "'");
}

// --- SFM -------------------------------------------------------------------

void SfmParams::validate() const {
  if (!std::isfinite(v0) || !std::isfinite(tau) || !std::isfinite(A_veh) ||
      !std::isfinite(B_veh) || !std::isfinite(goal)) {
    throw ConfigError("SFM parameters must be finite");
  }
  if (!(tau > 0.0)) throw ConfigError("SFM tau must be positive");
  if (!(B_veh > 0.0)) throw ConfigError("SFM B_veh must be positive");
  if (A_veh < 0.0) throw ConfigError("SFM A_veh must be non-negative");
  if (!(v0 > 0.0)) throw ConfigError("SFM v0 must be positive");
}

double sfm_acceleration(double d_ped, double v_ped, double gap, double d_CA,
                        const SfmParams& p) {
  const double goal_dir = d_ped < p.goal ? 1.0 : (d_ped > p.goal ? -1.0 : 0.0);
  const double away_dir = d_ped < 0.0 ? -1.0 : 1.0;
  const double driving = (p.v0 * goal_dir - v_ped) / p.tau;
  const double repulsion = std::isinf(gap) ? 0.0 : p.A_veh * std::exp((d_CA - gap) / p.B_veh);
  return driving + repulsion * away_dir;
}

PedestrianCommand sfm_step(const PedestrianState& ped, const VehicleState& veh,
                           const SfmParams& params, const Geometry& geometry, double dt) {
  if (!(dt > 0.0)) throw ContractViolation("dt must be positive");
  const double gap = separation(veh.d_veh, ped.d_ped, geometry.L_corridor);
  const double accel = sfm_acceleration(ped.d_ped, ped.v_ped, gap, geometry.d_CA, params);
  const double cap = std::min(2.0 * params.v0, kPedSpeedMax);
  return {PedestrianSourceKind::Sfm, std::clamp(ped.v_ped + accel * dt, 0.0, cap), ped.i_ped};
}

// --- MDP -------------------------------------------------------------------

std::string_view to_string(MdpAction action) noexcept {
  switch (action) {
    case MdpAction::Accelerate:
      return "accelerate";
    case MdpAction::Hold:
      return "hold";
    case MdpAction::Decelerate:
      return "decelerate";
    case MdpAction::Wait:
      return "wait";
  }
  return "wait";
}

void MdpSpec::validate() const {
  if (!(d_max > d_min)) throw ConfigError("MDP position grid is empty");
  if (position_bins < 2 || velocity_bins < 2) throw ConfigError("MDP grid needs >= 2 bins per axis");
  if (!(dv > 0.0) || !(period > 0.0)) throw ConfigError("MDP dv and period must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("MDP gamma must lie in (0, 1)");
  if (!(gap_edges[0] > 0.0)) throw ConfigError("MDP gap edges must be positive");
  for (std::size_t i = 1; i < gap_edges.size(); ++i) {
    if (!(gap_edges[i] > gap_edges[i - 1])) throw ConfigError("MDP gap edges must increase");
  }
  if (!std::isfinite(goal_reward) || !std::isfinite(collision_penalty) ||
      !std::isfinite(step_cost)) {
    throw ConfigError("MDP rewards must be finite");
  }
  if (!(d_CA > 0.0)) throw ConfigError("MDP d_CA must be positive");
}

namespace {

double bin_width(const MdpSpec& s) {
  return (s.d_max - s.d_min) / static_cast<double>(s.position_bins);
}

// Nearest of evenly spaced cells, ties to the lower index.
std::size_t nearest_cell(double x, std::size_t count) {
  const double idx = std::ceil(x - 0.5);
  if (!(idx > 0.0)) return 0;
  return std::min(static_cast<std::size_t>(idx), count - 1);
}

}  // namespace

TabularMdp build_pedestrian_mdp(const MdpSpec& spec) {
  spec.validate();
  const std::size_t n_pos = spec.position_bins;
  const std::size_t n_vel = spec.velocity_bins;
  const std::size_t n_gap = spec.gap_bins();
  const double width = bin_width(spec);
  TabularMdp mdp(spec.state_count(), kMdpActionCount, spec.gamma);

  auto index = [&](std::size_t p, std::size_t v, std::size_t g) {
    return (p * n_vel + v) * n_gap + g;
  };
  auto center = [&](std::size_t p) { return spec.d_min + (static_cast<double>(p) + 0.5) * width; };

  // Probability that the vehicle's time gap drops into the next lower bin
  // within one decision period; from the lowest bin it passes the crossing.
  std::vector<double> advance(n_gap, 0.0);
  for (std::size_t g = 0; g + 1 < n_gap; ++g) {
    const double lower = g == 0 ? 0.0 : spec.gap_edges[g - 1];
    advance[g] = std::min(1.0, spec.period / (spec.gap_edges[g] - lower));
  }

  for (std::size_t p = 0; p < n_pos; ++p) {
    const bool goal = center(p) >= spec.goal;
    const bool in_ca = std::abs(center(p)) < spec.d_CA;
    for (std::size_t v = 0; v < n_vel; ++v) {
      for (std::size_t g = 0; g < n_gap; ++g) {
        const std::size_t s = index(p, v, g);
        if (goal) {
          mdp.set_terminal(s, spec.goal_reward, static_cast<std::size_t>(MdpAction::Wait));
          continue;
        }
        const double reward = -spec.step_cost - ((in_ca && g == 0) ? spec.collision_penalty : 0.0);
        for (std::size_t a = 0; a < kMdpActionCount; ++a) {
          std::size_t v_next = v;
          switch (static_cast<MdpAction>(a)) {
            case MdpAction::Accelerate:
              v_next = std::min(v + 1, n_vel - 1);
              break;
            case MdpAction::Hold:
              break;
            case MdpAction::Decelerate:
              v_next = v == 0 ? 0 : v - 1;
              break;
            case MdpAction::Wait:
              v_next = 0;
              break;
          }
          const double travel = static_cast<double>(v_next) * spec.dv * spec.period / width;
          const double whole = std::floor(travel);
          const double frac = travel - whole;
          const std::size_t p_lo = std::min(p + static_cast<std::size_t>(whole), n_pos - 1);
          const std::size_t p_hi = std::min(p_lo + 1, n_pos - 1);

          std::size_t g_moved = g;
          double moved = 0.0;
          if (g + 1 < n_gap) {
            g_moved = g == 0 ? n_gap - 1 : g - 1;
            moved = advance[g];
          }
          const std::pair<std::size_t, double> pos_out[] = {{p_lo, 1.0 - frac}, {p_hi, frac}};
          const std::pair<std::size_t, double> gap_out[] = {{g, 1.0 - moved}, {g_moved, moved}};
          for (const auto& [pn, pp] : pos_out) {
            for (const auto& [gn, gp] : gap_out) {
              mdp.add_transition(s, a, index(pn, v_next, gn), pp * gp);
            }
          }
          mdp.set_reward(s, a, reward);
        }
      }
    }
  }
  return mdp;
}

PedestrianMdp::PedestrianMdp(MdpSpec spec, TabularMdp model, MdpSolution solution)
    : spec_(std::move(spec)), model_(std::move(model)), solution_(std::move(solution)) {}

std::shared_ptr<const PedestrianMdp> PedestrianMdp::solve(const MdpSpec& spec, double tol) {
  TabularMdp model = build_pedestrian_mdp(spec);
  MdpSolution solution = mdp_solve(model, tol);
  return std::shared_ptr<const PedestrianMdp>(
      new PedestrianMdp(spec, std::move(model), std::move(solution)));
}

std::size_t PedestrianMdp::index(const MdpCell& c) const noexcept {
  return (c.position * spec_.velocity_bins + c.velocity) * spec_.gap_bins() + c.gap;
}

MdpCell PedestrianMdp::cell_of(std::size_t index) const noexcept {
  MdpCell c;
  c.gap = index % spec_.gap_bins();
  index /= spec_.gap_bins();
  c.velocity = index % spec_.velocity_bins;
  c.position = index / spec_.velocity_bins;
  return c;
}

double PedestrianMdp::position_center(std::size_t bin) const noexcept {
  return spec_.d_min + (static_cast<double>(bin) + 0.5) * bin_width(spec_);
}

bool PedestrianMdp::is_goal(std::size_t position_bin) const noexcept {
  return position_center(position_bin) >= spec_.goal;
}

MdpCell PedestrianMdp::discretize(double d_ped, double v_ped, double gap_seconds) const noexcept {
  MdpCell c;
  c.position = nearest_cell((d_ped - spec_.d_min) / bin_width(spec_) - 0.5, spec_.position_bins);
  c.velocity = nearest_cell(v_ped / spec_.dv, spec_.velocity_bins);
  c.gap = static_cast<std::size_t>(
      std::upper_bound(spec_.gap_edges.begin(), spec_.gap_edges.end(), gap_seconds) -
      spec_.gap_edges.begin());
  return c;
}

MdpAction PedestrianMdp::action(const MdpCell& cell) const noexcept {
  return static_cast<MdpAction>(solution_.policy[index(cell)]);
}

double vehicle_time_gap(const VehicleState& veh, double L_corridor, double k_num) {
  if (veh.d_veh >= 0.0) return veh.d_veh / (veh.v_veh + k_num);
  if (veh.d_veh >= -L_corridor) return 0.0;
  return std::numeric_limits<double>::infinity();
}

PedestrianCommand mdp_step(const PedestrianState& ped, const VehicleState& veh,
                           const PedestrianMdp& model, const Geometry& geometry, double k_num) {
  const MdpSpec& spec = model.spec();
  const double gap = vehicle_time_gap(veh, geometry.L_corridor, k_num);
  const MdpCell cell = model.discretize(ped.d_ped, ped.v_ped, gap);
  double v = ped.v_ped;
  // A goal cell is entered up to half a cell early; finish the walk first.
  if (model.is_goal(cell.position) && ped.d_ped < spec.goal) {
    return {PedestrianSourceKind::Mdp, ped.v_ped, ped.i_ped};
  }
  switch (model.action(cell)) {
    case MdpAction::Accelerate:
      v += spec.dv;
      break;
    case MdpAction::Hold:
      break;
    case MdpAction::Decelerate:
      v -= spec.dv;
      break;
    case MdpAction::Wait:
      v = 0.0;
      break;
  }
  const double cap = std::min(static_cast<double>(spec.velocity_bins - 1) * spec.dv, kPedSpeedMax);
  return {PedestrianSourceKind::Mdp, std::clamp(v, 0.0, cap), ped.i_ped};
}

// --- Scripted --------------------------------------------------------------

void validate_script(const Script& script) {
  if (script.empty()) throw ConfigError("pedestrian script is empty");
  for (std::size_t k = 0; k < script.size(); ++k) {
    const auto& pt = script[k];
    if (!std::isfinite(pt.t) || !std::isfinite(pt.v_ped) || !std::isfinite(pt.i_ped)) {
      throw ConfigError("script breakpoint " + std::to_string(k) + " is not finite");
    }
    if (pt.v_ped < 0.0 || pt.v_ped > kPedSpeedMax) {
      throw ConfigError("script speed out of [0, 3] at breakpoint " + std::to_string(k));
    }
    if (pt.i_ped < 0.0 || pt.i_ped > 1.0) {
      throw ConfigError("script intention out of [0, 1] at breakpoint " + std::to_string(k));
    }
    if (k > 0 && !(pt.t > script[k - 1].t)) {
      throw ConfigError("script breakpoints must be strictly increasing in t");
    }
  }
}

PedestrianCommand scripted_step(const Script& script, double t) {
  if (script.empty()) throw ContractViolation("pedestrian script is empty");
  auto it = std::upper_bound(script.begin(), script.end(), t,
                             [](double value, const ScriptPoint& pt) { return value < pt.t; });
  const ScriptPoint& pt = it == script.begin() ? script.front() : *std::prev(it);
  return {PedestrianSourceKind::Scripted, pt.v_ped, pt.i_ped};
}

// --- External --------------------------------------------------------------

ExternalPedestrian::ExternalPedestrian(double v_ped0, double i_ped0,
                                       std::vector<ExternalInput> inputs)
    : v_(v_ped0), i_(i_ped0) {
  for (const auto& in : inputs) push(in);
}

bool ExternalPedestrian::push(const ExternalInput& input) {
  if (input.tick <= last_tick_) return false;
  // Keep arrival order among inputs for the same tick.
  auto it = std::upper_bound(pending_.begin(), pending_.end(), input.tick,
                             [](std::int64_t tick, const ExternalInput& in) { return tick < in.tick; });
  pending_.insert(it, input);
  return true;
}

PedestrianCommand ExternalPedestrian::next(std::int64_t tick) {
  std::size_t used = 0;
  while (used < pending_.size() && pending_[used].tick <= tick) {
    v_ = std::clamp(pending_[used].v_ped, 0.0, kPedSpeedMax);
    i_ = std::clamp(pending_[used].i_ped, 0.0, 1.0);
    applied_.push_back(pending_[used]);
    ++used;
  }
  pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(used));
  last_tick_ = tick;
  return {PedestrianSourceKind::External, v_, i_};
}

// --- Dispatch --------------------------------------------------------------

PedestrianCommand step_pedestrian(PedestrianSource& source, const PedestrianState& ped,
                                  const VehicleState& veh, const PedestrianContext& ctx,
                                  std::int64_t tick) {
  struct Visitor {
    const PedestrianState& ped;
    const VehicleState& veh;
    const PedestrianContext& ctx;
    std::int64_t tick;

    PedestrianCommand operator()(SfmPedestrian& m) const {
      return sfm_step(ped, veh, m.params, ctx.geometry, ctx.dt);
    }
    PedestrianCommand operator()(MdpPedestrian& m) const {
      if (!m.model) throw ConfigError("MDP pedestrian has no solved model");
      if (tick >= m.next_decision_tick) {
        const auto cmd = mdp_step(ped, veh, *m.model, ctx.geometry, ctx.k_num);
        m.held_speed = cmd.v_ped_next;
        const auto period_ticks =
            std::max<std::int64_t>(1, std::llround(m.model->spec().period / ctx.dt));
        m.next_decision_tick = tick + period_ticks;
      }
      return {PedestrianSourceKind::Mdp, m.held_speed, ped.i_ped};
    }
    PedestrianCommand operator()(ScriptedPedestrian& m) const {
      return scripted_step(m.script, static_cast<double>(tick) * ctx.dt);
    }
    PedestrianCommand operator()(ExternalPedestrian& m) const { return m.next(tick); }
  };
  return std::visit(Visitor{ped, veh, ctx, tick}, source);
}

}  // namespace crossing
