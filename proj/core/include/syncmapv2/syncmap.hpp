#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "syncmapv2/errors.hpp"

namespace syncmap {

struct DynamicsConfig {
    int k = 15;                    // map dimensionality
    double beta = 0.1;             // leaking rate
    int l_movmean = 2000;          // moving-average window, steps
    double alpha_pos_floor = 0.05;
    double alpha_neg_cap = 1.5;
    double neg_amp_a = 0.01;
    double neg_amp_b = 2.0;
    double lr_smoothing = 0.1;     // exponential-smoothing weight
    std::uint64_t seed = 0;

    // deviation switch: alpha_neg held at the constant 1.0
    bool alpha_neg_constant = false;

    // component toggles
    bool adaptive_lr = true;       // off: both rates fixed at 0.1
    bool symmetrical = true;       // off: negative set = full complement
    bool space_norm = true;        // off: hyper-sphere rescale (divide by max norm)
    bool moving_average = true;    // off: read_map returns the current snapshot
    bool leaking = true;           // off: displacement applied unscaled

    bool trace_enabled = false;    // sample d+ with trace_probability per update
    double trace_probability = 0.01;

    // snapshot ring buffer budget; above it the window is accumulated on the fly
    std::size_t mem_budget_bytes = 256ull << 20;

    void validate() const;
};

struct ActivationSets {
    std::vector<int> ps;
    std::vector<int> ns;
};

// Readout accumulator over the last `window` per-step coordinate snapshots.
// Keeps a snapshot ring when it fits the memory budget; otherwise sums just
// the final window of a declared run (arm() announces the total step count).
class MovingAverage {
public:
    void configure(int n, int k, int window, std::size_t budget_bytes);
    void arm(std::uint64_t total_steps);
    void push(std::uint64_t step, const Eigen::MatrixXd& coords);
    Eigen::MatrixXd read() const;  // throws StateError when no samples
    bool has_samples() const;
    bool ring_mode() const { return ring_mode_; }
    void reset();

private:
    int window_ = 0;
    bool ring_mode_ = true;
    std::vector<Eigen::MatrixXd> ring_;
    std::size_t ring_next_ = 0;
    std::size_t ring_count_ = 0;
    bool armed_ = false;
    std::uint64_t accum_from_ = 0;
    Eigen::MatrixXd accum_sum_;
    std::uint64_t accum_count_ = 0;
};

// N points in k-dimensional map space plus the adaptive-rate and readout
// state; stepped strictly sequentially.
struct MapState {
    int n = 0;
    int k = 0;
    Eigen::MatrixXd coords;        // n x k
    double smoothed_rate = 0.0;
    std::uint64_t step_count = 0;
    std::mt19937_64 rng;           // init + negative sampling
    std::mt19937_64 trace_rng;     // trace subsampling only
    MovingAverage average;
    std::vector<std::pair<std::uint64_t, double>> trace;  // (step, d+)

    // observables from the most recent step, for invariant checks
    double last_d_pos = 0.0;
    double last_alpha_pos = 0.0;
    double last_alpha_neg = 0.0;
    bool last_updated = false;
    std::uint64_t zero_variance_events = 0;
};

// Coordinates drawn i.i.d. uniform on [-1,1]^k from the seeded generator,
// then normalized; smoothed rate starts at the positive-rate floor.
MapState init_map(int n, const DynamicsConfig& cfg);

// Rebuilds a MapState around explicit coordinates (checkpoint resume).
MapState make_map_state(const Eigen::MatrixXd& coords, double smoothed_rate,
                        std::uint64_t step_count, const DynamicsConfig& cfg);

// Samples |ps| negatives uniformly without replacement from the complement
// (the whole complement when it is smaller, or when symmetry is disabled).
ActivationSets select_activation(const std::vector<int>& ps, int n,
                                 std::mt19937_64& rng, bool symmetrical = true);

// Centroids of both sets, or nullopt when either cardinality is <= 1
// (the step is skipped).
std::optional<std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd>> centroids(
    const MapState& map, const ActivationSets& sets);

// Unit displacement per node: toward cp for ps members, away from the
// population centroid for ns members, zero elsewhere. Nodes within 1e-12 of
// their reference point get zero.
Eigen::MatrixXd feedback(const MapState& map, const ActivationSets& sets,
                         const Eigen::RowVectorXd& cp);

// Smoothed-rate update and thresholds; mutates map.smoothed_rate.
std::pair<double, double> adaptive_rates(MapState& map, double d_pos, int n,
                                         const DynamicsConfig& cfg);

// Shifts/scales each dimension to mean 0, population std 1. Zero-variance
// dimensions are only shifted and counted in zero_variance_events.
void normalize_space(MapState& map, const DynamicsConfig& cfg);

// One full update: centroids (skip advances the counter only), feedback,
// rates, leaked displacement, normalization, snapshot push.
void step(MapState& map, const ActivationSets& sets, const DynamicsConfig& cfg);

// Mean coordinates over the last window (snapshot when averaging disabled).
Eigen::MatrixXd read_map(const MapState& map, const DynamicsConfig& cfg);

// Drives tau iterations fed by `source` (which yields each step's positive
// set) and returns read_map. The MapState persists for reuse.
Eigen::MatrixXd run_dynamics(MapState& map, const std::function<std::vector<int>()>& source,
                             std::uint64_t tau, const DynamicsConfig& cfg);

// Checkpoint: n, k, step, coords, smoothed rate, generator states.
void save_map_state(const MapState& map, const std::filesystem::path& path);
MapState load_map_state(const std::filesystem::path& path, const DynamicsConfig& cfg);

}  // namespace syncmap
