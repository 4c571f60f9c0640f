#include "syncmapv2/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>
#include <utility>

#include <json.hpp>

#include "syncmapv2/serial.hpp"

namespace syncmap {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fmt_hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

std::string linkage_name(Linkage linkage) {
    switch (linkage) {
        case Linkage::ward: return "ward";
        case Linkage::single: return "single";
        case Linkage::average: return "average";
    }
    throw ArgumentError("unknown linkage");
}

Linkage parse_linkage(const std::string& name) {
    if (name == "ward") return Linkage::ward;
    if (name == "single") return Linkage::single;
    if (name == "average") return Linkage::average;
    throw ConfigError("unknown linkage: " + name);
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true") return true;
    if (value == "0" || value == "false") return false;
    throw ConfigError("config key " + key + " expects a boolean, got: " + value);
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + " expects an integer, got: " + value);
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + " expects a number, got: " + value);
    }
}

struct ConfigEntry {
    std::string key;
    std::string value;
    bool semantic;
};

std::vector<ConfigEntry> config_entries(const PipelineConfig& cfg) {
    std::vector<ConfigEntry> e;
    auto add = [&](const char* key, std::string value, bool semantic) {
        e.push_back({key, std::move(value), semantic});
    };
    add("resize", std::to_string(cfg.resize), true);
    add("grid_rows", std::to_string(cfg.grid_rows), true);
    add("grid_cols", std::to_string(cfg.grid_cols), true);
    add("repetitions", std::to_string(cfg.repetitions), true);
    add("list_size", std::to_string(cfg.list_size), true);
    add("tau", std::to_string(cfg.tau), true);
    add("n_min", std::to_string(cfg.n_min), true);
    add("n_max", std::to_string(cfg.n_max), true);
    add("linkage", linkage_name(cfg.linkage), true);
    add("double_tau", cfg.double_tau ? "1" : "0", true);
    add("seed", std::to_string(cfg.seed), true);
    add("esn_neurons", std::to_string(cfg.esn.n_neurons), true);
    add("esn_spectral_radius", fmt_double(cfg.esn.spectral_radius), true);
    add("esn_sparsity", fmt_double(cfg.esn.sparsity), true);
    add("esn_leak", fmt_double(cfg.esn.leak), true);
    add("esn_input_scaling", fmt_double(cfg.esn.input_scaling), true);
    add("esn_weight_scaling", fmt_double(cfg.esn.weight_scaling), true);
    add("k", std::to_string(cfg.dynamics.k), true);
    add("beta", fmt_double(cfg.dynamics.beta), true);
    add("l_movmean", std::to_string(cfg.dynamics.l_movmean), true);
    add("lr_smoothing", fmt_double(cfg.dynamics.lr_smoothing), true);
    add("alpha_pos_floor", fmt_double(cfg.dynamics.alpha_pos_floor), true);
    add("alpha_neg_cap", fmt_double(cfg.dynamics.alpha_neg_cap), true);
    add("neg_amp_a", fmt_double(cfg.dynamics.neg_amp_a), true);
    add("neg_amp_b", fmt_double(cfg.dynamics.neg_amp_b), true);
    add("alpha_neg_constant", cfg.dynamics.alpha_neg_constant ? "1" : "0", true);
    add("adaptive_lr", cfg.dynamics.adaptive_lr ? "1" : "0", true);
    add("symmetrical", cfg.dynamics.symmetrical ? "1" : "0", true);
    add("space_norm", cfg.dynamics.space_norm ? "1" : "0", true);
    add("moving_average", cfg.dynamics.moving_average ? "1" : "0", true);
    add("leaking", cfg.dynamics.leaking ? "1" : "0", true);
    add("trace", cfg.dynamics.trace_enabled ? "1" : "0", false);
    add("trace_probability", fmt_double(cfg.dynamics.trace_probability), false);
    add("mem_budget_mb", std::to_string(cfg.dynamics.mem_budget_bytes >> 20), false);
    add("threads", std::to_string(cfg.n_threads), false);
    add("output_dir", cfg.output_dir, false);
    add("cache_dir", cfg.cache_dir, false);
    add("overlays", cfg.emit_overlays ? "1" : "0", false);
    return e;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

void write_report(const fs::path& path, const json& j) {
    std::ofstream os = open_output(path);
    os << j.dump(2) << "\n";
    if (!os) throw IoError("cannot write " + path.string());
}

json record_to_json(const RunRecord& rec) {
    json j;
    j["image"] = rec.image;
    j["condition"] = rec.condition;
    j["config_hash"] = fmt_hex64(rec.config_hash);
    j["wall_seconds"] = rec.wall_seconds;
    json per_n = json::array();
    for (const auto& [n, m] : rec.miou_per_n) per_n.push_back({n, m});
    j["miou_per_n"] = per_n;
    j["artifacts"] = rec.artifacts;
    j["failed"] = rec.failed;
    if (rec.failed) j["error"] = rec.error;
    return j;
}

json config_to_json(const PipelineConfig& cfg) {
    json j;
    for (const auto& entry : config_entries(cfg)) j[entry.key] = entry.value;
    return j;
}

json ttest_to_json(const std::optional<TTestResult>& t) {
    if (!t) return nullptr;
    json j;
    j["t"] = t->t;
    j["dof"] = t->dof;
    j["p"] = t->p;
    return j;
}

std::uint64_t image_content_hash(const ImageTensor& img) {
    const std::string_view bytes(reinterpret_cast<const char*>(img.data.data()),
                                 img.data.size() * sizeof(float));
    std::uint64_t h = fnv1a(bytes);
    const std::string dims =
        std::to_string(img.height) + "x" + std::to_string(img.width);
    return fnv1a(dims, h);
}

SimilarityMatrix obtain_similarity(const std::vector<PatchResponse>& responses,
                                   const ImageTensor& img, const PipelineConfig& cfg) {
    if (cfg.cache_dir.empty()) return build_similarity_matrix(responses, cfg.n_threads);
    std::string key = fmt_hex64(image_content_hash(img)) + "_" + fmt_hex64(cfg.esn.seed);
    key += "_" + std::to_string(cfg.grid_rows) + "x" + std::to_string(cfg.grid_cols);
    key += "_r" + std::to_string(cfg.repetitions);
    const fs::path path = fs::path(cfg.cache_dir) / ("sim_" + key + ".bin");
    if (fs::exists(path)) {
        try {
            SimilarityMatrix m = load_similarity(path);
            if (m.n == static_cast<int>(responses.size())) return m;
        } catch (const Error&) {
            // stale or truncated entry: fall through and rebuild
        }
    }
    SimilarityMatrix m = build_similarity_matrix(responses, cfg.n_threads);
    fs::create_directories(path.parent_path());
    save_similarity(m, path);
    return m;
}

// per-image best mIoU for one condition, keyed by image id
std::map<std::string, double> per_image_best(const ScoreTable& scores,
                                             const std::string& condition) {
    std::map<std::string, double> best;
    for (const auto& row : scores.rows) {
        if (row.condition != condition) continue;
        auto it = best.find(row.image);
        if (it == best.end() || row.miou > it->second) best[row.image] = row.miou;
    }
    return best;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::string path_id(const fs::path& p) { return p.generic_string(); }

// processing of one (image, condition) unit inside the batch runs
struct UnitSpec {
    std::size_t entry = 0;
    std::string condition = "clean";
    bool corrupted = false;
    CorruptionKind kind = CorruptionKind::identity;
    int severity = 1;
    bool keep_pixels = false;  // retain image/labels for overlays + baselines
};

struct UnitResult {
    RunRecord record;
    std::vector<ScoreRow> rows;
    std::vector<int> n_values;
    std::vector<LabelMap> grid_labels;
    ImageTensor native;
    LabelMap gt;
    bool ok = false;
};

UnitResult run_unit(const ManifestEntry& entry, const UnitSpec& spec,
                    const PipelineConfig& cfg, const EsnWeights& esn,
                    int dtw_threads, bool identity_hook) {
    UnitResult u;
    u.record.image = path_id(entry.image);
    u.record.condition = spec.condition;
    u.record.config_hash = config_hash(cfg);
    try {
        ImageTensor img = load_image(entry.image);
        LabelMap gt = load_label_map(entry.ground_truth);
        if (spec.corrupted) {
            CorruptionSpec cspec;
            cspec.kind = identity_hook ? CorruptionKind::identity : spec.kind;
            cspec.severity = spec.severity;
            cspec.seed = corruption_seed(u.record.image, spec.kind, spec.severity);
            img = corrupt(img, cspec);
        }
        PipelineConfig local = cfg;
        local.n_threads = dtw_threads;
        MapState map = init_map(local.n_patches(), local.dynamics);
        std::mt19937_64 input_rng(local.input_seed());
        SegmentResult seg = segment_image(img, local, esn, map, input_rng,
                                          local.tau, u.record.image);
        u.record.wall_seconds = seg.record.wall_seconds;
        for (std::size_t i = 0; i < seg.n_values.size(); ++i) {
            const LabelMap pred = labels_to_pixels(seg.grid_labels[i], gt.height,
                                                   gt.width, cfg.resize);
            const double m = unsupervised_miou(pred, gt);
            u.rows.push_back({u.record.image, spec.condition, seg.n_values[i], m});
            u.record.miou_per_n.emplace_back(seg.n_values[i], m);
        }
        u.n_values = seg.n_values;
        if (spec.keep_pixels) {
            u.grid_labels = std::move(seg.grid_labels);
            u.native = std::move(img);
            u.gt = std::move(gt);
        }
        u.ok = true;
    } catch (const std::exception& ex) {
        u.record.failed = true;
        u.record.error = ex.what();
    }
    return u;
}

std::vector<UnitResult> run_units(const std::vector<ManifestEntry>& manifest,
                                  const std::vector<UnitSpec>& specs,
                                  const PipelineConfig& cfg, const EsnWeights& esn,
                                  bool identity_hook) {
    const unsigned hw = std::thread::hardware_concurrency();
    const int threads = cfg.n_threads > 0 ? cfg.n_threads
                                          : static_cast<int>(hw ? hw : 1);
    std::vector<UnitResult> results(specs.size());
    if (threads > 1 && specs.size() > 1) {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= specs.size()) break;
                results[i] = run_unit(manifest[specs[i].entry], specs[i], cfg, esn,
                                      1, identity_hook);
            }
        };
        const std::size_t n_workers =
            std::min<std::size_t>(static_cast<std::size_t>(threads), specs.size());
        std::vector<std::thread> pool;
        for (std::size_t t = 1; t < n_workers; ++t) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();
    } else {
        for (std::size_t i = 0; i < specs.size(); ++i)
            results[i] = run_unit(manifest[specs[i].entry], specs[i], cfg, esn,
                                  threads, identity_hook);
    }
    return results;
}

int best_n_of(const RunRecord& rec) {
    int best_n = 0;
    double best = -1.0;
    for (const auto& [n, m] : rec.miou_per_n)
        if (m > best) {
            best = m;
            best_n = n;
        }
    return best_n;
}

}  // namespace

void PipelineConfig::apply_desk_profile() {
    grid_rows = 24;
    grid_cols = 24;
    tau = 20000;
    dynamics.l_movmean = 500;
    finalize();
}

void PipelineConfig::finalize() {
    esn.input_dim = 3 * patch_h();
    esn.seed = seed;
    dynamics.seed = derive_seed(seed, 1);
}

std::uint64_t PipelineConfig::input_seed() const { return derive_seed(seed, 2); }

void PipelineConfig::validate() const {
    if (resize <= 0) throw ConfigError("resize must be positive");
    if (grid_rows <= 0 || grid_cols <= 0) throw ConfigError("grid dims must be positive");
    if (resize % grid_rows != 0 || resize % grid_cols != 0)
        throw ConfigError("resize must be divisible by the grid dims");
    if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
    if (list_size < 1 || list_size > n_patches())
        throw ConfigError("list_size must lie in [1, patch count]");
    if (tau == 0) throw ConfigError("tau must be positive");
    if (n_min < 1 || n_min > n_max) throw ConfigError("cluster range is empty");
    if (n_max > n_patches()) throw ConfigError("cluster range exceeds the patch count");
    if (n_threads < 0) throw ConfigError("threads must be >= 0");
    if (steps_per_image() < static_cast<std::uint64_t>(dynamics.l_movmean))
        throw ConfigError("readout window exceeds the per-image step budget");
    esn.validate();
    dynamics.validate();
    if (esn.input_dim != 3 * patch_h())
        throw ConfigError("ESN input width does not match the patch height; call finalize()");
}

void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                        const std::string& value) {
    if (key == "resize") cfg.resize = static_cast<int>(parse_int(key, value));
    else if (key == "grid_rows") cfg.grid_rows = static_cast<int>(parse_int(key, value));
    else if (key == "grid_cols") cfg.grid_cols = static_cast<int>(parse_int(key, value));
    else if (key == "repetitions") cfg.repetitions = static_cast<int>(parse_int(key, value));
    else if (key == "list_size") cfg.list_size = static_cast<int>(parse_int(key, value));
    else if (key == "tau") cfg.tau = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "n_min") cfg.n_min = static_cast<int>(parse_int(key, value));
    else if (key == "n_max") cfg.n_max = static_cast<int>(parse_int(key, value));
    else if (key == "linkage") cfg.linkage = parse_linkage(value);
    else if (key == "double_tau") cfg.double_tau = parse_bool(key, value);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "esn_neurons") cfg.esn.n_neurons = static_cast<int>(parse_int(key, value));
    else if (key == "esn_spectral_radius") cfg.esn.spectral_radius = parse_double(key, value);
    else if (key == "esn_sparsity") cfg.esn.sparsity = parse_double(key, value);
    else if (key == "esn_leak") cfg.esn.leak = parse_double(key, value);
    else if (key == "esn_input_scaling") cfg.esn.input_scaling = parse_double(key, value);
    else if (key == "esn_weight_scaling") cfg.esn.weight_scaling = parse_double(key, value);
    else if (key == "k") cfg.dynamics.k = static_cast<int>(parse_int(key, value));
    else if (key == "beta") cfg.dynamics.beta = parse_double(key, value);
    else if (key == "l_movmean") cfg.dynamics.l_movmean = static_cast<int>(parse_int(key, value));
    else if (key == "lr_smoothing") cfg.dynamics.lr_smoothing = parse_double(key, value);
    else if (key == "alpha_pos_floor") cfg.dynamics.alpha_pos_floor = parse_double(key, value);
    else if (key == "alpha_neg_cap") cfg.dynamics.alpha_neg_cap = parse_double(key, value);
    else if (key == "neg_amp_a") cfg.dynamics.neg_amp_a = parse_double(key, value);
    else if (key == "neg_amp_b") cfg.dynamics.neg_amp_b = parse_double(key, value);
    else if (key == "alpha_neg_constant") cfg.dynamics.alpha_neg_constant = parse_bool(key, value);
    else if (key == "adaptive_lr") cfg.dynamics.adaptive_lr = parse_bool(key, value);
    else if (key == "symmetrical") cfg.dynamics.symmetrical = parse_bool(key, value);
    else if (key == "space_norm") cfg.dynamics.space_norm = parse_bool(key, value);
    else if (key == "moving_average") cfg.dynamics.moving_average = parse_bool(key, value);
    else if (key == "leaking") cfg.dynamics.leaking = parse_bool(key, value);
    else if (key == "trace") cfg.dynamics.trace_enabled = parse_bool(key, value);
    else if (key == "trace_probability") cfg.dynamics.trace_probability = parse_double(key, value);
    else if (key == "mem_budget_mb")
        cfg.dynamics.mem_budget_bytes =
            static_cast<std::size_t>(parse_int(key, value)) << 20;
    else if (key == "threads") cfg.n_threads = static_cast<int>(parse_int(key, value));
    else if (key == "output_dir") cfg.output_dir = value;
    else if (key == "cache_dir") cfg.cache_dir = value;
    else if (key == "overlays") cfg.emit_overlays = parse_bool(key, value);
    else throw ConfigError("unknown config key: " + key);
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream is = open_input(path);
    PipelineConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                              ": expected key=value");
        apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.finalize();
    return cfg;
}

void save_config(const PipelineConfig& cfg, const std::filesystem::path& path) {
    std::ofstream os = open_output(path);
    for (const auto& entry : config_entries(cfg))
        os << entry.key << "=" << entry.value << "\n";
    if (!os) throw IoError("cannot write " + path.string());
}

std::uint64_t config_hash(const PipelineConfig& cfg) {
    std::string canon;
    for (const auto& entry : config_entries(cfg)) {
        if (!entry.semantic) continue;
        canon += entry.key;
        canon += '=';
        canon += entry.value;
        canon += '\n';
    }
    return fnv1a(canon);
}

std::uint64_t corruption_seed(const std::string& image_path, CorruptionKind kind,
                              int severity) {
    return fnv1a(image_path + "|" + to_string(kind) + "|" + std::to_string(severity));
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
    std::ifstream is = open_input(path);
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    auto resolve = [&](const std::string& raw) {
        fs::path p(raw);
        if (!fs::exists(p) && p.is_relative() && fs::exists(base / p)) return base / p;
        return p;
    };
    std::vector<ManifestEntry> entries;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string img, gt;
        ls >> img >> gt;
        if (img.empty() || gt.empty())
            throw FormatError(path.string() + ":" + std::to_string(line_no) +
                              ": expected an image path and a ground-truth path");
        if (img.find(',') != std::string::npos || gt.find(',') != std::string::npos)
            throw FormatError(path.string() + ":" + std::to_string(line_no) +
                              ": paths must not contain commas");
        entries.push_back({resolve(img), resolve(gt)});
    }
    return entries;
}

std::vector<int> sample_input_step(const std::vector<NeighborList>& prox,
                                   const std::vector<NeighborList>& sim,
                                   std::mt19937_64& rng) {
    if (prox.empty() || prox.size() != sim.size())
        throw ArgumentError("neighbor lists are incomplete");
    std::uniform_int_distribution<int> pick(0, static_cast<int>(prox.size()) - 1);
    const int ref = pick(rng);
    std::vector<int> ps = prox[ref].members;
    for (int v : sim[ref].members)
        if (std::find(ps.begin(), ps.end(), v) == ps.end()) ps.push_back(v);
    return ps;
}

SegmentResult segment_image(const ImageTensor& img, const PipelineConfig& cfg,
                            const EsnWeights& esn, MapState& map,
                            std::mt19937_64& input_rng, std::uint64_t steps,
                            const std::string& image_id) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    SegmentResult out;
    out.record.image = image_id;
    out.record.config_hash = config_hash(cfg);

    const ImageTensor resized = resize_bilinear(img, cfg.resize, cfg.resize);
    PatchGrid grid = split_patches(resized, cfg.grid_rows, cfg.grid_cols);
    std::vector<PatchResponse> responses;
    responses.reserve(grid.patches.size());
    for (const ImageTensor& patch : grid.patches)
        responses.push_back(
            run_patch(esn, temporize_patch(patch, cfg.repetitions), cfg.esn.leak));

    const SimilarityMatrix sim_matrix = obtain_similarity(responses, img, cfg);
    const int n = sim_matrix.n;

    float lo = std::numeric_limits<float>::infinity();
    float hi = -std::numeric_limits<float>::infinity();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            lo = std::min(lo, sim_matrix.d(i, j));
            hi = std::max(hi, sim_matrix.d(i, j));
        }
    if (hi - lo < 1e-12f) {
        out.degenerate = true;
        std::cerr << "syncmapv2: " << image_id
                  << ": degenerate similarity (uniform input?); "
                     "segment labels will be arbitrary\n";
    }

    std::vector<NeighborList> prox(n), siml(n);
    for (int i = 0; i < n; ++i) {
        prox[i] = proximity_neighbors(i, cfg.grid_rows, cfg.grid_cols);
        siml[i] = top_similar(sim_matrix, i, cfg.list_size);
    }

    auto source = [&] { return sample_input_step(prox, siml, input_rng); };
    const Eigen::MatrixXd readout = run_dynamics(map, source, steps, cfg.dynamics);

    const auto cuts = cluster_range(readout, cfg.n_min, cfg.n_max, cfg.linkage);
    for (std::size_t i = 0; i < cuts.size(); ++i) {
        out.n_values.push_back(cfg.n_min + static_cast<int>(i));
        LabelMap lm;
        lm.height = cfg.grid_rows;
        lm.width = cfg.grid_cols;
        lm.labels = cuts[i];
        out.grid_labels.push_back(std::move(lm));
    }

    out.record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

SegmentResult segment_image(const ImageTensor& img, const PipelineConfig& cfg,
                            const EsnWeights& esn, const std::string& image_id) {
    MapState map = init_map(cfg.n_patches(), cfg.dynamics);
    std::mt19937_64 input_rng(cfg.input_seed());
    return segment_image(img, cfg, esn, map, input_rng, cfg.tau, image_id);
}

StandardReport run_standard(const std::vector<ManifestEntry>& manifest,
                            const PipelineConfig& cfg) {
    cfg.validate();
    if (manifest.empty()) throw ArgumentError("empty manifest");
    fs::create_directories(cfg.output_dir);
    const EsnWeights esn = init_esn(cfg.esn);

    std::vector<UnitSpec> specs;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        UnitSpec s;
        s.entry = i;
        s.keep_pixels = true;
        specs.push_back(s);
    }
    std::vector<UnitResult> results = run_units(manifest, specs, cfg, esn, false);

    StandardReport rep;
    for (auto& u : results) {
        rep.records.push_back(u.record);
        for (auto& row : u.rows) rep.scores.rows.push_back(row);
    }

    if (!rep.scores.rows.empty()) {
        std::tie(rep.ods_n, rep.ods_miou) = ods(rep.scores);
        rep.ois_miou = ois(rep.scores);

        std::vector<double> rand_scores, kmeans_scores;
        for (std::size_t i = 0; i < results.size(); ++i) {
            UnitResult& u = results[i];
            if (!u.ok) continue;
            const LabelMap rand_pred =
                random_baseline(u.gt.height, u.gt.width, rep.ods_n,
                                fnv1a(u.record.image + "|random"));
            rand_scores.push_back(unsupervised_miou(rand_pred, u.gt));
            const ImageTensor small = resize_bilinear(u.native, cfg.resize, cfg.resize);
            const LabelMap km = kmeans_baseline(small, rep.ods_n,
                                                fnv1a(u.record.image + "|kmeans"));
            const LabelMap km_pred = resize_nearest(km, u.gt.height, u.gt.width);
            kmeans_scores.push_back(unsupervised_miou(km_pred, u.gt));

            if (cfg.emit_overlays) {
                const int rank = rep.ods_n - cfg.n_min;
                if (rank >= 0 && rank < static_cast<int>(u.grid_labels.size())) {
                    const LabelMap pred = labels_to_pixels(
                        u.grid_labels[rank], u.native.height, u.native.width, cfg.resize);
                    fs::create_directories(fs::path(cfg.output_dir) / "overlays");
                    const fs::path out =
                        fs::path(cfg.output_dir) / "overlays" /
                        (std::to_string(i) + "_" + manifest[i].image.stem().string() +
                         "_n" + std::to_string(rep.ods_n) + ".png");
                    emit_overlay(u.native, pred, out);
                    rep.records[i].artifacts.push_back(out.generic_string());
                }
            }
        }
        rep.random_baseline_miou = mean_of(rand_scores);
        rep.kmeans_baseline_miou = mean_of(kmeans_scores);
    }

    save_scores_csv(rep.scores, fs::path(cfg.output_dir) / "scores.csv");

    json j;
    j["mode"] = "standard";
    j["config"] = config_to_json(cfg);
    j["config_hash"] = fmt_hex64(config_hash(cfg));
    j["ods"] = {{"n", rep.ods_n}, {"miou", rep.ods_miou}};
    j["ois"] = rep.ois_miou;
    j["baselines"] = {{"random_miou_at_ods", rep.random_baseline_miou},
                      {"kmeans_miou_at_ods", rep.kmeans_baseline_miou}};
    json images = json::array();
    int failed = 0;
    for (const auto& rec : rep.records) {
        images.push_back(record_to_json(rec));
        if (rec.failed) ++failed;
    }
    j["images"] = images;
    j["n_failed"] = failed;
    write_report(fs::path(cfg.output_dir) / "report.json", j);
    return rep;
}

RobustnessReport run_robustness(const std::vector<ManifestEntry>& manifest,
                                const PipelineConfig& cfg, bool identity_hook) {
    cfg.validate();
    if (manifest.empty()) throw ArgumentError("empty manifest");
    fs::create_directories(cfg.output_dir);
    const EsnWeights esn = init_esn(cfg.esn);

    const std::array<CorruptionKind, 4> kinds = {
        CorruptionKind::gaussian_noise, CorruptionKind::zoom_blur,
        CorruptionKind::snow, CorruptionKind::contrast};
    const std::array<int, 3> severities = {1, 3, 5};

    std::vector<UnitSpec> specs;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        UnitSpec s;
        s.entry = i;
        s.keep_pixels = cfg.emit_overlays;
        specs.push_back(s);
    }
    for (CorruptionKind kind : kinds)
        for (int sev : severities)
            for (std::size_t i = 0; i < manifest.size(); ++i) {
                UnitSpec s;
                s.entry = i;
                s.condition = to_string(kind) + "_s" + std::to_string(sev);
                s.corrupted = true;
                s.kind = kind;
                s.severity = sev;
                specs.push_back(s);
            }

    std::vector<UnitResult> results = run_units(manifest, specs, cfg, esn, identity_hook);

    RobustnessReport rep;
    for (auto& u : results) {
        rep.records.push_back(u.record);
        for (auto& row : u.rows) rep.scores.rows.push_back(row);
    }

    const ScoreTable clean = filter_condition(rep.scores, "clean");
    std::vector<double> clean_best_ordered;
    if (!clean.rows.empty()) {
        std::tie(rep.clean_ods_n, rep.clean_ods_miou) = ods(clean);
        rep.clean_ois = ois(clean);
        const auto clean_best = per_image_best(rep.scores, "clean");
        for (const auto& e : manifest) {
            auto it = clean_best.find(path_id(e.image));
            if (it != clean_best.end()) clean_best_ordered.push_back(it->second);
        }
    }

    for (CorruptionKind kind : kinds) {
        RobustnessKind rk;
        rk.kind = kind;
        std::vector<double> corrupted_best;
        for (std::size_t s = 0; s < severities.size(); ++s) {
            const std::string condition =
                to_string(kind) + "_s" + std::to_string(severities[s]);
            const ScoreTable sub = filter_condition(rep.scores, condition);
            rk.ois_by_severity[s] = sub.rows.empty() ? 0.0 : ois(sub);
            const auto best = per_image_best(rep.scores, condition);
            for (const auto& e : manifest) {
                auto it = best.find(path_id(e.image));
                if (it != best.end()) corrupted_best.push_back(it->second);
            }
        }
        rk.mean_ois = (rk.ois_by_severity[0] + rk.ois_by_severity[1] +
                       rk.ois_by_severity[2]) / 3.0;
        rk.relative_drop =
            rep.clean_ois > 0.0 ? (rep.clean_ois - rk.mean_ois) / rep.clean_ois : 0.0;
        try {
            rk.clean_vs_corrupted = ttest_independent(clean_best_ordered, corrupted_best);
        } catch (const Error&) {
            rk.clean_vs_corrupted = std::nullopt;
        }
        rep.kinds.push_back(rk);
    }

    if (cfg.emit_overlays && !clean.rows.empty()) {
        fs::create_directories(fs::path(cfg.output_dir) / "overlays");
        for (std::size_t i = 0; i < manifest.size(); ++i) {
            UnitResult& u = results[i];  // clean units come first, in manifest order
            if (!u.ok) continue;
            const int rank = rep.clean_ods_n - cfg.n_min;
            if (rank < 0 || rank >= static_cast<int>(u.grid_labels.size())) continue;
            const LabelMap pred = labels_to_pixels(u.grid_labels[rank], u.native.height,
                                                   u.native.width, cfg.resize);
            const fs::path out =
                fs::path(cfg.output_dir) / "overlays" /
                (std::to_string(i) + "_" + manifest[i].image.stem().string() + "_n" +
                 std::to_string(rep.clean_ods_n) + ".png");
            emit_overlay(u.native, pred, out);
            rep.records[i].artifacts.push_back(out.generic_string());
        }
    }

    save_scores_csv(rep.scores, fs::path(cfg.output_dir) / "scores.csv");

    json j;
    j["mode"] = "robustness";
    j["config"] = config_to_json(cfg);
    j["config_hash"] = fmt_hex64(config_hash(cfg));
    j["identity_hook"] = identity_hook;
    j["clean"] = {{"ods_n", rep.clean_ods_n},
                  {"ods_miou", rep.clean_ods_miou},
                  {"ois", rep.clean_ois}};
    json jkinds = json::array();
    for (const auto& rk : rep.kinds) {
        json k;
        k["kind"] = to_string(rk.kind);
        k["ois_s1"] = rk.ois_by_severity[0];
        k["ois_s3"] = rk.ois_by_severity[1];
        k["ois_s5"] = rk.ois_by_severity[2];
        k["mean_ois"] = rk.mean_ois;
        k["relative_drop"] = rk.relative_drop;
        k["ttest_clean_vs_corrupted"] = ttest_to_json(rk.clean_vs_corrupted);
        jkinds.push_back(k);
    }
    j["kinds"] = jkinds;
    json images = json::array();
    int failed = 0;
    for (const auto& rec : rep.records) {
        images.push_back(record_to_json(rec));
        if (rec.failed) ++failed;
    }
    j["images"] = images;
    j["n_failed"] = failed;
    write_report(fs::path(cfg.output_dir) / "report.json", j);
    return rep;
}

AdaptabilityReport run_adaptability(const std::vector<ManifestEntry>& manifest,
                                    const PipelineConfig& cfg) {
    cfg.validate();
    if (manifest.empty()) throw ArgumentError("empty manifest");
    if (cfg.n_threads > 1)
        throw ConfigError("adaptability mode is order-dependent; run it single-threaded");
    fs::create_directories(cfg.output_dir);
    fs::create_directories(fs::path(cfg.output_dir) / "traces");
    fs::create_directories(fs::path(cfg.output_dir) / "checkpoints");
    const EsnWeights esn = init_esn(cfg.esn);

    AdaptabilityReport rep;
    rep.steps_per_image = cfg.steps_per_image();

    // pass 1: the persistent map, never re-initialized
    PipelineConfig nr = cfg;
    nr.dynamics.trace_enabled = true;
    MapState map = init_map(nr.n_patches(), nr.dynamics);
    std::mt19937_64 input_rng(nr.input_seed());
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        RunRecord rec;
        rec.image = path_id(manifest[i].image);
        rec.condition = "noreinit";
        rec.config_hash = config_hash(cfg);
        try {
            const ImageTensor img = load_image(manifest[i].image);
            const LabelMap gt = load_label_map(manifest[i].ground_truth);
            SegmentResult seg = segment_image(img, nr, esn, map, input_rng,
                                              rep.steps_per_image, rec.image);
            rec.wall_seconds = seg.record.wall_seconds;
            for (std::size_t r = 0; r < seg.n_values.size(); ++r) {
                const LabelMap pred = labels_to_pixels(seg.grid_labels[r], gt.height,
                                                       gt.width, cfg.resize);
                const double m = unsupervised_miou(pred, gt);
                rep.scores.rows.push_back({rec.image, "noreinit", seg.n_values[r], m});
                rec.miou_per_n.emplace_back(seg.n_values[r], m);
            }
            char name[32];
            std::snprintf(name, sizeof(name), "map_after_%02zu.map", i + 1);
            const fs::path ckpt = fs::path(cfg.output_dir) / "checkpoints" / name;
            save_map_state(map, ckpt);
            rec.artifacts.push_back(ckpt.generic_string());
            if (cfg.emit_overlays && !rec.miou_per_n.empty()) {
                const int bn = best_n_of(rec);
                const int rank = bn - cfg.n_min;
                const LabelMap pred = labels_to_pixels(
                    seg.grid_labels[rank], img.height, img.width, cfg.resize);
                fs::create_directories(fs::path(cfg.output_dir) / "overlays");
                const fs::path out = fs::path(cfg.output_dir) / "overlays" /
                                     (std::to_string(i) + "_" +
                                      manifest[i].image.stem().string() + "_noreinit_n" +
                                      std::to_string(bn) + ".png");
                emit_overlay(img, pred, out);
                rec.artifacts.push_back(out.generic_string());
            }
        } catch (const std::exception& ex) {
            rec.failed = true;
            rec.error = ex.what();
        }
        rep.records.push_back(rec);
    }
    rep.dpos_trace = map.trace;

    const fs::path trace_path = fs::path(cfg.output_dir) / "traces" / "dpos.csv";
    {
        std::ofstream os = open_output(trace_path);
        os << "step,d_pos\n";
        for (const auto& [s, d] : rep.dpos_trace)
            os << s << "," << fmt_double(d) << "\n";
        if (!os) throw IoError("cannot write " + trace_path.string());
    }

    // pass 2: the with-reinit control, a fresh map and input stream per image
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        RunRecord rec;
        rec.image = path_id(manifest[i].image);
        rec.condition = "reinit";
        rec.config_hash = config_hash(cfg);
        try {
            const ImageTensor img = load_image(manifest[i].image);
            const LabelMap gt = load_label_map(manifest[i].ground_truth);
            MapState fresh = init_map(cfg.n_patches(), cfg.dynamics);
            std::mt19937_64 rng(cfg.input_seed());
            SegmentResult seg = segment_image(img, cfg, esn, fresh, rng,
                                              rep.steps_per_image, rec.image);
            rec.wall_seconds = seg.record.wall_seconds;
            for (std::size_t r = 0; r < seg.n_values.size(); ++r) {
                const LabelMap pred = labels_to_pixels(seg.grid_labels[r], gt.height,
                                                       gt.width, cfg.resize);
                const double m = unsupervised_miou(pred, gt);
                rep.scores.rows.push_back({rec.image, "reinit", seg.n_values[r], m});
                rec.miou_per_n.emplace_back(seg.n_values[r], m);
            }
        } catch (const std::exception& ex) {
            rec.failed = true;
            rec.error = ex.what();
        }
        rep.records.push_back(rec);
    }

    const auto no_best = per_image_best(rep.scores, "noreinit");
    const auto re_best = per_image_best(rep.scores, "reinit");
    for (const auto& e : manifest) {
        const std::string id = path_id(e.image);
        auto a = no_best.find(id);
        auto b = re_best.find(id);
        if (a == no_best.end() || b == re_best.end()) continue;
        rep.noreinit_ois.push_back(a->second);
        rep.reinit_ois.push_back(b->second);
    }
    try {
        rep.paired = ttest_paired(rep.noreinit_ois, rep.reinit_ois);
    } catch (const Error&) {
        rep.paired = std::nullopt;
    }

    save_scores_csv(rep.scores, fs::path(cfg.output_dir) / "scores.csv");

    json j;
    j["mode"] = "adaptability";
    j["config"] = config_to_json(cfg);
    j["config_hash"] = fmt_hex64(config_hash(cfg));
    j["steps_per_image"] = rep.steps_per_image;
    json boundaries = json::array();
    for (std::size_t i = 1; i < manifest.size(); ++i)
        boundaries.push_back(rep.steps_per_image * i);
    j["boundaries"] = boundaries;
    j["noreinit_ois"] = rep.noreinit_ois;
    j["reinit_ois"] = rep.reinit_ois;
    j["noreinit_mean_ois"] = mean_of(rep.noreinit_ois);
    j["reinit_mean_ois"] = mean_of(rep.reinit_ois);
    j["paired_ttest"] = ttest_to_json(rep.paired);
    j["trace_file"] = trace_path.generic_string();
    json images = json::array();
    int failed = 0;
    for (const auto& rec : rep.records) {
        images.push_back(record_to_json(rec));
        if (rec.failed) ++failed;
    }
    j["images"] = images;
    j["n_failed"] = failed;
    write_report(fs::path(cfg.output_dir) / "report.json", j);
    return rep;
}

std::array<std::uint8_t, 3> palette_color(int label) {
    if (label < 0) throw ArgumentError("negative segment label");
    std::uint8_t r = 0, g = 0, b = 0;
    int id = label;
    for (int j = 0; j < 8 && id != 0; ++j) {
        r = static_cast<std::uint8_t>(r | ((id >> 0) & 1) << (7 - j));
        g = static_cast<std::uint8_t>(g | ((id >> 1) & 1) << (7 - j));
        b = static_cast<std::uint8_t>(b | ((id >> 2) & 1) << (7 - j));
        id >>= 3;
    }
    return {r, g, b};
}

void emit_overlay(const ImageTensor& img, const LabelMap& labels,
                  const std::filesystem::path& path) {
    if (labels.height != img.height || labels.width != img.width)
        throw ArgumentError("overlay label dims do not match the image");
    ImageTensor out = ImageTensor::zeros(img.height, img.width);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
            const std::uint16_t lab = labels.at(r, c);
            if (lab == kVoidLabel) {
                for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = img.at(r, c, ch);
                continue;
            }
            const auto color = palette_color(lab);
            for (int ch = 0; ch < 3; ++ch)
                out.at(r, c, ch) =
                    0.5f * img.at(r, c, ch) + 0.5f * (color[ch] / 255.0f);
        }
    save_image_png(out, path);
}

}  // namespace syncmap
