#include "syncmapv2/syncmap.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include "syncmapv2/serial.hpp"

namespace syncmap {

void DynamicsConfig::validate() const {
    if (k < 2) throw ConfigError("map dimensionality must be >= 2");
    if (beta <= 0.0 || beta > 1.0) throw ConfigError("beta must lie in (0, 1]");
    if (l_movmean < 1) throw ConfigError("moving-average window must be >= 1");
    if (lr_smoothing <= 0.0 || lr_smoothing > 1.0)
        throw ConfigError("lr smoothing must lie in (0, 1]");
    if (trace_probability < 0.0 || trace_probability > 1.0)
        throw ConfigError("trace probability must lie in [0, 1]");
}

void MovingAverage::configure(int n, int k, int window, std::size_t budget_bytes) {
    window_ = window;
    const std::size_t per_snapshot = static_cast<std::size_t>(n) * k * sizeof(double);
    ring_mode_ = per_snapshot * static_cast<std::size_t>(window) <= budget_bytes;
    reset();
}

void MovingAverage::reset() {
    ring_.clear();
    ring_next_ = 0;
    ring_count_ = 0;
    armed_ = false;
    accum_from_ = 0;
    accum_sum_.resize(0, 0);
    accum_count_ = 0;
}

void MovingAverage::arm(std::uint64_t total_steps) {
    if (ring_mode_) return;
    armed_ = true;
    accum_from_ = total_steps > static_cast<std::uint64_t>(window_)
                      ? total_steps - static_cast<std::uint64_t>(window_)
                      : 0;
    accum_sum_.resize(0, 0);
    accum_count_ = 0;
}

void MovingAverage::push(std::uint64_t step, const Eigen::MatrixXd& coords) {
    if (ring_mode_) {
        if (ring_.size() < static_cast<std::size_t>(window_)) {
            ring_.push_back(coords);
            ring_count_ = ring_.size();
        } else {
            ring_[ring_next_] = coords;
            ring_next_ = (ring_next_ + 1) % ring_.size();
            ring_count_ = ring_.size();
        }
        return;
    }
    if (!armed_)
        throw StateError("moving-average window exceeds the snapshot budget; "
                         "declare the run length via arm()");
    if (step < accum_from_) return;
    if (accum_count_ == 0) {
        accum_sum_ = coords;
    } else {
        accum_sum_ += coords;
    }
    ++accum_count_;
}

bool MovingAverage::has_samples() const {
    return ring_mode_ ? ring_count_ > 0 : accum_count_ > 0;
}

Eigen::MatrixXd MovingAverage::read() const {
    if (!has_samples()) throw StateError("moving average has no samples");
    if (ring_mode_) {
        // oldest-first summation, so both accumulation modes agree bitwise
        const std::size_t start =
            ring_.size() == static_cast<std::size_t>(window_) ? ring_next_ : 0;
        Eigen::MatrixXd sum = ring_[start];
        for (std::size_t i = 1; i < ring_count_; ++i)
            sum += ring_[(start + i) % ring_count_];
        return sum / static_cast<double>(ring_count_);
    }
    return accum_sum_ / static_cast<double>(accum_count_);
}

MapState make_map_state(const Eigen::MatrixXd& coords, double smoothed_rate,
                        std::uint64_t step_count, const DynamicsConfig& cfg) {
    cfg.validate();
    if (coords.rows() < 2) throw ArgumentError("need at least 2 nodes");
    if (coords.cols() != cfg.k)
        throw ArgumentError("coordinate dimensionality does not match config");
    MapState map;
    map.n = static_cast<int>(coords.rows());
    map.k = cfg.k;
    map.coords = coords;
    map.smoothed_rate = smoothed_rate;
    map.step_count = step_count;
    map.rng.seed(cfg.seed);
    map.trace_rng.seed(derive_seed(cfg.seed, 0x7aceULL));
    map.average.configure(map.n, map.k, cfg.l_movmean, cfg.mem_budget_bytes);
    return map;
}

MapState init_map(int n, const DynamicsConfig& cfg) {
    cfg.validate();
    if (n < 2) throw ArgumentError("need at least 2 nodes");
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Eigen::MatrixXd coords(n, cfg.k);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < cfg.k; ++j) coords(i, j) = uni(rng);
    MapState map = make_map_state(coords, cfg.alpha_pos_floor, 0, cfg);
    map.rng = rng;  // continue the stream the draw advanced
    normalize_space(map, cfg);
    return map;
}

ActivationSets select_activation(const std::vector<int>& ps, int n,
                                 std::mt19937_64& rng, bool symmetrical) {
    ActivationSets sets;
    sets.ps = ps;
    if (ps.empty()) return sets;  // skip signal: empty sets short-circuit step()

    auto in_ps = [&](int v) {
        return std::find(ps.begin(), ps.end(), v) != ps.end();
    };
    const int complement = n - static_cast<int>(ps.size());
    if (!symmetrical || complement <= static_cast<int>(ps.size())) {
        sets.ns.reserve(complement);
        for (int v = 0; v < n; ++v)
            if (!in_ps(v)) sets.ns.push_back(v);
        return sets;
    }
    sets.ns.reserve(ps.size());
    std::uniform_int_distribution<int> pick(0, n - 1);
    while (sets.ns.size() < ps.size()) {
        const int v = pick(rng);
        if (in_ps(v)) continue;
        if (std::find(sets.ns.begin(), sets.ns.end(), v) != sets.ns.end()) continue;
        sets.ns.push_back(v);
    }
    return sets;
}

std::optional<std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd>> centroids(
    const MapState& map, const ActivationSets& sets) {
    if (sets.ps.size() <= 1 || sets.ns.size() <= 1) return std::nullopt;
    Eigen::RowVectorXd cp = Eigen::RowVectorXd::Zero(map.k);
    Eigen::RowVectorXd cn = Eigen::RowVectorXd::Zero(map.k);
    for (int i : sets.ps) cp += map.coords.row(i);
    for (int i : sets.ns) cn += map.coords.row(i);
    cp /= static_cast<double>(sets.ps.size());
    cn /= static_cast<double>(sets.ns.size());
    return std::make_pair(cp, cn);
}

Eigen::MatrixXd feedback(const MapState& map, const ActivationSets& sets,
                         const Eigen::RowVectorXd& cp) {
    Eigen::MatrixXd disp = Eigen::MatrixXd::Zero(map.n, map.k);
    for (int i : sets.ps) {
        Eigen::RowVectorXd to_cp = cp - map.coords.row(i);
        const double dist = to_cp.norm();
        if (dist >= 1e-12) disp.row(i) = to_cp / dist;
    }
    // repeller sits at the population centroid; once the space is normalized
    // this is the origin up to rounding
    const Eigen::RowVectorXd center = map.coords.colwise().mean();
    for (int i : sets.ns) {
        Eigen::RowVectorXd outward = map.coords.row(i) - center;
        const double dist = outward.norm();
        if (dist >= 1e-12) disp.row(i) = outward / dist;
    }
    return disp;
}

std::pair<double, double> adaptive_rates(MapState& map, double d_pos, int n,
                                         const DynamicsConfig& cfg) {
    if (!cfg.adaptive_lr) return {0.1, 0.1};
    const double raw = d_pos / std::sqrt(static_cast<double>(cfg.k));
    map.smoothed_rate += cfg.lr_smoothing * (raw - map.smoothed_rate);
    const double alpha_pos = std::max(map.smoothed_rate, cfg.alpha_pos_floor);
    double alpha_neg;
    if (cfg.alpha_neg_constant) {
        alpha_neg = 1.0;
    } else {
        const double amplifier = cfg.neg_amp_a * static_cast<double>(n) + cfg.neg_amp_b;
        alpha_neg = std::min(map.smoothed_rate * amplifier, cfg.alpha_neg_cap);
    }
    return {alpha_pos, alpha_neg};
}

void normalize_space(MapState& map, const DynamicsConfig& cfg) {
    if (!cfg.space_norm) {
        // original hyper-sphere rescale, scale fixed to 1
        const double max_norm = map.coords.rowwise().norm().maxCoeff();
        if (max_norm >= 1e-12) map.coords /= max_norm;
        return;
    }
    for (int j = 0; j < map.k; ++j) {
        auto col = map.coords.col(j);
        const double mean = col.mean();
        col.array() -= mean;
        const double var = col.squaredNorm() / static_cast<double>(map.n);
        const double sd = std::sqrt(var);
        if (sd < 1e-15) {
            if (map.zero_variance_events++ == 0)
                std::cerr << "syncmapv2: zero-variance map dimension, scale left unchanged\n";
            continue;
        }
        col /= sd;
    }
}

void step(MapState& map, const ActivationSets& sets, const DynamicsConfig& cfg) {
    const auto cents = centroids(map, sets);
    if (!cents) {
        map.last_updated = false;
        map.average.push(map.step_count, map.coords);
        ++map.step_count;
        return;
    }
    const Eigen::RowVectorXd& cp = cents->first;

    double d_pos = 0.0;
    for (int i : sets.ps) d_pos += (map.coords.row(i) - cp).norm();
    d_pos /= static_cast<double>(sets.ps.size());

    const Eigen::MatrixXd disp = feedback(map, sets, cp);
    const auto [alpha_pos, alpha_neg] = adaptive_rates(map, d_pos, map.n, cfg);

    if (cfg.trace_enabled) {
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        if (uni(map.trace_rng) < cfg.trace_probability)
            map.trace.emplace_back(map.step_count, d_pos);
    }

    const double beta_eff = cfg.leaking ? cfg.beta : 1.0;
    for (int i : sets.ps) map.coords.row(i) += beta_eff * alpha_pos * disp.row(i);
    for (int i : sets.ns) map.coords.row(i) += beta_eff * alpha_neg * disp.row(i);

    normalize_space(map, cfg);

    map.last_d_pos = d_pos;
    map.last_alpha_pos = alpha_pos;
    map.last_alpha_neg = alpha_neg;
    map.last_updated = true;
    map.average.push(map.step_count, map.coords);
    ++map.step_count;
}

Eigen::MatrixXd read_map(const MapState& map, const DynamicsConfig& cfg) {
    if (!cfg.moving_average) return map.coords;
    return map.average.read();
}

Eigen::MatrixXd run_dynamics(MapState& map, const std::function<std::vector<int>()>& source,
                             std::uint64_t tau, const DynamicsConfig& cfg) {
    map.average.arm(map.step_count + tau);
    for (std::uint64_t t = 0; t < tau; ++t) {
        const std::vector<int> ps = source();
        const ActivationSets sets = select_activation(ps, map.n, map.rng, cfg.symmetrical);
        step(map, sets, cfg);
    }
    return read_map(map, cfg);
}

namespace {

constexpr std::string_view kMapMagic = "SMV2MAP1";

void write_rng(std::ostream& os, const std::mt19937_64& rng) {
    std::ostringstream ss;
    ss << rng;
    const std::string s = ss.str();
    write_pod<std::uint64_t>(os, s.size());
    write_bytes(os, s.data(), s.size());
}

void read_rng(std::istream& is, std::mt19937_64& rng) {
    const auto len = read_pod<std::uint64_t>(is);
    if (len > (1u << 20)) throw FormatError("implausible generator state size");
    std::string s(len, '\0');
    read_bytes(is, s.data(), len);
    std::istringstream ss(s);
    ss >> rng;
    if (!ss) throw FormatError("cannot parse generator state");
}

}  // namespace

void save_map_state(const MapState& map, const std::filesystem::path& path) {
    auto os = open_output(path);
    write_magic(os, kMapMagic);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(map.n));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(map.k));
    write_pod<std::uint64_t>(os, map.step_count);
    write_pod<double>(os, map.smoothed_rate);
    for (int i = 0; i < map.n; ++i)
        for (int j = 0; j < map.k; ++j) write_pod<double>(os, map.coords(i, j));
    write_rng(os, map.rng);
    write_rng(os, map.trace_rng);
}

MapState load_map_state(const std::filesystem::path& path, const DynamicsConfig& cfg) {
    auto is = open_input(path);
    expect_magic(is, kMapMagic);
    const auto n = read_pod<std::uint32_t>(is);
    const auto k = read_pod<std::uint32_t>(is);
    if (static_cast<int>(k) != cfg.k)
        throw FormatError("checkpoint dimensionality does not match config");
    const auto step_count = read_pod<std::uint64_t>(is);
    const double smoothed = read_pod<double>(is);
    Eigen::MatrixXd coords(n, k);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = 0; j < k; ++j) coords(i, j) = read_pod<double>(is);
    MapState map = make_map_state(coords, smoothed, step_count, cfg);
    read_rng(is, map.rng);
    read_rng(is, map.trace_rng);
    return map;
}

}  // namespace syncmap
