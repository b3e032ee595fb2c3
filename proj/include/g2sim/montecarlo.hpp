#pragma once

// Kinetic Monte Carlo of independent three-level emitters.
//
// Each emitter is a continuous-time Markov chain over {Ground, Excited,
// Shelved}. In every state one exponential waiting time is drawn per
// outgoing channel and the earliest one fires. Only Excited -> Ground
// transitions emit a photon. Trajectories start in Ground at -burn_in and
// record events in [0, duration], so the recorded window is stationary.
//
// Generators are pull-based and hold O(1) state per emitter, so arbitrarily
// long durations run in bounded memory.

#include <array>
#include <cstdint>
#include <optional>
#include <queue>
#include <vector>

#include "g2sim/kinetics.hpp"
#include "g2sim/random.hpp"

namespace g2sim {

enum class Level : std::uint8_t { Ground = 0, Excited = 1, Shelved = 2 };

struct EmitterState {
  Level level = Level::Ground;
};

enum class EventKind : std::uint8_t { Radiative, Background };

inline constexpr int kBackgroundEmitter = -1;

struct EmissionEvent {
  double time = 0.0;  // ns
  int emitter_id = 0;
  EventKind kind = EventKind::Radiative;

  friend bool operator==(const EmissionEvent&, const EmissionEvent&) = default;
};

struct SimConfig {
  double duration = 0.0;  // ns
  std::uint64_t seed = 0;
  int n_emitters = 1;
  RateSet rates;
  double background_rate = 0.0;  // per detector, 1/ns

  void validate() const;
};

// Relaxation time discarded before recording: 10 / slowest decay constant.
double burn_in_time(const RateSet& rates);

struct Transition {
  double time;
  Level from;
  Level to;
};

// Bare Markov chain; advances one transition per step().
class EmitterChain {
 public:
  EmitterChain(const RateSet& rates, Rng rng, double start_time = 0.0);

  // Returns nullopt when the current state has no outgoing channel.
  std::optional<Transition> step();

  EmitterState state() const { return state_; }
  double time() const { return time_; }

 private:
  RateSet rates_;
  Rng rng_;
  EmitterState state_;
  double time_;
};

// Radiative events of one emitter, in time order.
class EmitterTrajectory {
 public:
  EmitterTrajectory(const RateSet& rates, double duration, std::uint64_t seed,
                    std::uint64_t stream = 0, int emitter_id = 0);

  std::optional<EmissionEvent> next();

 private:
  EmitterChain chain_;
  double duration_;
  int emitter_id_;
  bool done_ = false;
};

// Homogeneous Poisson process of Background events.
class PoissonStream {
 public:
  PoissonStream(double rate, double duration, std::uint64_t seed, std::uint64_t stream = 0);

  std::optional<EmissionEvent> next();

 private:
  double rate_;
  double duration_;
  Rng rng_;
  double time_ = 0.0;
};

// Deterministic k-way merge of N emitter trajectories and, when
// background_rate > 0, a Poisson stream at 2 * background_rate (one share
// per detector; routing splits it evenly). Ties break by emitter id.
class EnsembleStream {
 public:
  explicit EnsembleStream(const SimConfig& cfg);

  std::optional<EmissionEvent> next();

 private:
  struct Head {
    EmissionEvent event;
    std::size_t source;
  };
  struct Later {
    bool operator()(const Head& a, const Head& b) const {
      if (a.event.time != b.event.time) return a.event.time > b.event.time;
      return a.source > b.source;
    }
  };

  std::optional<EmissionEvent> pull(std::size_t source);

  std::vector<EmitterTrajectory> emitters_;
  std::optional<PoissonStream> background_;
  std::priority_queue<Head, std::vector<Head>, Later> heap_;
};

std::vector<EmissionEvent> simulate_emitter(const RateSet& rates, double duration, std::uint64_t seed,
                                            std::uint64_t stream = 0);

std::vector<EmissionEvent> simulate_ensemble(const SimConfig& cfg);

std::vector<EmissionEvent> poisson_background(double rate, double duration, std::uint64_t seed,
                                              std::uint64_t stream = 0);

// Time spent in each level over [0, duration] plus the individual Ground
// dwell times completed inside the window (capped at max_dwell_samples).
struct OccupationStats {
  std::array<double, 3> time_in_level{};
  std::vector<double> ground_dwell_times;
  std::uint64_t n_radiative = 0;
};

OccupationStats sample_occupation(const RateSet& rates, double duration, std::uint64_t seed,
                                  std::uint64_t stream = 0, std::size_t max_dwell_samples = 1'000'000);

}  // namespace g2sim
