#include "g2sim/montecarlo.hpp"

#include <cmath>
#include <limits>

#include "g2sim/errors.hpp"

namespace g2sim {

void SimConfig::validate() const {
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw Error(ErrorKind::InvalidArgument, "duration must be positive");
  }
  if (n_emitters < 1) throw Error(ErrorKind::InvalidArgument, "n_emitters must be >= 1");
  if (!(background_rate >= 0.0) || !std::isfinite(background_rate)) {
    throw Error(ErrorKind::InvalidArgument, "background_rate must be >= 0");
  }
  rates.validate();
}

double burn_in_time(const RateSet& rates) {
  try {
    const DerivedParams dp = exact_params(rates);
    const double slowest = dp.gamma2 > 0.0 ? dp.gamma2 : dp.gamma1;
    return 10.0 / slowest;
  } catch (const Error&) {
    // Complex pair (or absorbing shelf): decay set by the real part S/2.
    const double s = rates.k12 + rates.k21 + rates.k23 + rates.k31;
    return 10.0 / (0.5 * s);
  }
}

EmitterChain::EmitterChain(const RateSet& rates, Rng rng, double start_time)
    : rates_(rates), rng_(std::move(rng)), time_(start_time) {}

std::optional<Transition> EmitterChain::step() {
  const Level from = state_.level;
  double wait = std::numeric_limits<double>::infinity();
  Level to = from;
  switch (from) {
    case Level::Ground:
      wait = rng_.exponential(rates_.k12);
      to = Level::Excited;
      break;
    case Level::Excited: {
      const double radiative = rng_.exponential(rates_.k21);
      const double shelve = rng_.exponential(rates_.k23);
      if (radiative <= shelve) {
        wait = radiative;
        to = Level::Ground;
      } else {
        wait = shelve;
        to = Level::Shelved;
      }
      break;
    }
    case Level::Shelved:
      wait = rng_.exponential(rates_.k31);
      to = Level::Ground;
      break;
  }
  if (!std::isfinite(wait)) return std::nullopt;
  time_ += wait;
  state_.level = to;
  return Transition{time_, from, to};
}

EmitterTrajectory::EmitterTrajectory(const RateSet& rates, double duration, std::uint64_t seed,
                                     std::uint64_t stream, int emitter_id)
    : chain_((rates.validate(), rates), Rng(seed, StreamPurpose::Emitter, stream), -burn_in_time(rates)),
      duration_(duration),
      emitter_id_(emitter_id) {}

std::optional<EmissionEvent> EmitterTrajectory::next() {
  while (!done_) {
    const auto tr = chain_.step();
    if (!tr || tr->time > duration_) {
      done_ = true;
      break;
    }
    if (tr->from == Level::Excited && tr->to == Level::Ground && tr->time >= 0.0) {
      return EmissionEvent{tr->time, emitter_id_, EventKind::Radiative};
    }
  }
  return std::nullopt;
}

PoissonStream::PoissonStream(double rate, double duration, std::uint64_t seed, std::uint64_t stream)
    : rate_(rate), duration_(duration), rng_(seed, StreamPurpose::Background, stream) {
  if (!(rate >= 0.0)) throw Error(ErrorKind::InvalidArgument, "background rate must be >= 0");
}

std::optional<EmissionEvent> PoissonStream::next() {
  time_ += rng_.exponential(rate_);
  if (!(time_ <= duration_)) return std::nullopt;
  return EmissionEvent{time_, kBackgroundEmitter, EventKind::Background};
}

EnsembleStream::EnsembleStream(const SimConfig& cfg) {
  cfg.validate();
  emitters_.reserve(static_cast<std::size_t>(cfg.n_emitters));
  for (int i = 0; i < cfg.n_emitters; ++i) {
    emitters_.emplace_back(cfg.rates, cfg.duration, cfg.seed, static_cast<std::uint64_t>(i), i);
  }
  if (cfg.background_rate > 0.0) background_.emplace(2.0 * cfg.background_rate, cfg.duration, cfg.seed);
  const std::size_t n_sources = emitters_.size() + (background_ ? 1 : 0);
  for (std::size_t s = 0; s < n_sources; ++s) {
    if (auto ev = pull(s)) heap_.push({*ev, s});
  }
}

std::optional<EmissionEvent> EnsembleStream::pull(std::size_t source) {
  if (source < emitters_.size()) return emitters_[source].next();
  return background_->next();
}

std::optional<EmissionEvent> EnsembleStream::next() {
  if (heap_.empty()) return std::nullopt;
  const Head head = heap_.top();
  heap_.pop();
  if (auto ev = pull(head.source)) heap_.push({*ev, head.source});
  return head.event;
}

std::vector<EmissionEvent> simulate_emitter(const RateSet& rates, double duration, std::uint64_t seed,
                                            std::uint64_t stream) {
  if (!(duration > 0.0)) throw Error(ErrorKind::InvalidArgument, "duration must be positive");
  EmitterTrajectory traj(rates, duration, seed, stream, static_cast<int>(stream));
  std::vector<EmissionEvent> out;
  while (auto ev = traj.next()) out.push_back(*ev);
  return out;
}

std::vector<EmissionEvent> simulate_ensemble(const SimConfig& cfg) {
  EnsembleStream stream(cfg);
  std::vector<EmissionEvent> out;
  while (auto ev = stream.next()) out.push_back(*ev);
  return out;
}

std::vector<EmissionEvent> poisson_background(double rate, double duration, std::uint64_t seed,
                                              std::uint64_t stream) {
  PoissonStream gen(rate, duration, seed, stream);
  std::vector<EmissionEvent> out;
  while (auto ev = gen.next()) out.push_back(*ev);
  return out;
}

OccupationStats sample_occupation(const RateSet& rates, double duration, std::uint64_t seed,
                                  std::uint64_t stream, std::size_t max_dwell_samples) {
  rates.validate();
  EmitterChain chain(rates, Rng(seed, StreamPurpose::Emitter, stream), -burn_in_time(rates));
  OccupationStats stats;
  double entered = chain.time();
  Level current = chain.state().level;
  while (true) {
    const auto tr = chain.step();
    const double leave = tr ? std::min(tr->time, duration) : duration;
    const double lo = std::max(entered, 0.0);
    if (leave > lo) stats.time_in_level[static_cast<std::size_t>(current)] += leave - lo;
    if (!tr || tr->time > duration) break;
    if (current == Level::Ground && entered >= 0.0 && stats.ground_dwell_times.size() < max_dwell_samples) {
      stats.ground_dwell_times.push_back(tr->time - entered);
    }
    if (tr->from == Level::Excited && tr->to == Level::Ground && tr->time >= 0.0) ++stats.n_radiative;
    entered = tr->time;
    current = tr->to;
  }
  return stats;
}

}  // namespace g2sim
