#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pugan/autodiff.hpp"
#include "pugan/geometry.hpp"
#include "pugan/losses.hpp"
#include "pugan/mesh.hpp"
#include "pugan/metrics.hpp"
#include "pugan/model.hpp"
#include "pugan/xyz_io.hpp"

namespace pugan {

namespace fs = std::filesystem;

/// Every hyperparameter of a training run. Serialized as ASCII key = value.
struct TrainConfig {
    // problem size
    std::size_t N = 256;
    std::size_t r = 4;
    std::size_t M = 50;
    // optimization
    std::size_t batch_size = 28;
    std::size_t epochs = 100;
    std::size_t iterations = 0;  // 0: derived from epochs and dataset size
    double lr_G = 1e-3;
    double lr_D = 1e-4;
    double lr_decay = 0.7;
    std::size_t lr_decay_steps = 50000;
    double lr_floor = 1e-6;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::size_t d_steps_per_g = 1;
    double lambda_gan = 0.5;
    double lambda_rec = 100.0;
    double lambda_uni = 10.0;
    double auction_epsilon = kDefaultAuctionEpsilon;
    // data preparation
    std::size_t patches_per_mesh = 200;
    std::size_t min_patches_per_mesh = 10;
    double patch_area_fraction = 0.05;
    std::size_t pool_size = kDefaultPoolSize;
    // augmentation
    bool augment_rotation = true;
    bool augment_scale = true;
    bool augment_jitter = true;
    double jitter_sigma = 0.01;
    double scale_min = 0.8;
    double scale_max = 1.2;
    // ablation switches
    bool use_discriminator = true;
    bool use_uniform_loss = true;
    bool use_attention = true;
    bool use_up_down_up = true;
    bool use_farthest_sampling = true;
    // architecture
    std::size_t C = 480;
    std::size_t C_prime = 128;
    std::size_t C_d = 64;
    std::size_t C_d_prime = 256;
    double grid_extent = 0.2;
    std::size_t knn_k = 16;
    std::size_t regression_hidden = 64;
    std::size_t fps_seed_index = 0;
    // inference and bookkeeping
    std::size_t inference_overlap = 3;
    std::size_t checkpoint_every = 1000;
    std::uint64_t seed = 0;

    /// Paper-scale defaults.
    static TrainConfig full() { return {}; }

    /// CPU-sized profile: N=64, rN=256, 500 iterations, 10 patches per mesh.
    static TrainConfig desk() {
        TrainConfig c;
        c.N = 64;
        c.batch_size = 4;
        c.iterations = 500;
        c.patches_per_mesh = 10;
        c.pool_size = 20000;
        c.checkpoint_every = 250;
        return c;
    }

    GeneratorConfig generator() const {
        GeneratorConfig g;
        g.N = N;
        g.r = r;
        g.C = static_cast<Eigen::Index>(C);
        g.C_prime = static_cast<Eigen::Index>(C_prime);
        g.grid_extent = grid_extent;
        g.knn_k = knn_k;
        g.regression_hidden = static_cast<Eigen::Index>(regression_hidden);
        g.use_attention = use_attention;
        g.use_up_down_up = use_up_down_up;
        g.use_farthest_sampling = use_farthest_sampling;
        g.fps_seed_index = fps_seed_index;
        return g;
    }

    DiscriminatorConfig discriminator() const {
        DiscriminatorConfig d;
        d.C_d = static_cast<Eigen::Index>(C_d);
        d.C_d_prime = static_cast<Eigen::Index>(C_d_prime);
        d.use_attention = use_attention;
        return d;
    }

    LossWeights weights() const { return {lambda_gan, lambda_rec, lambda_uni}; }

    UniformLossConfig uniform() const {
        UniformLossConfig u;
        u.seeds = M;
        u.start_index = 0;
        return u;
    }

    void validate() const {
        auto require = [](bool ok, const char* what) {
            if (!ok) throw Error(std::string("config: ") + what);
        };
        require(N >= 1 && r >= 1 && M >= 1, "N, r and M must be positive");
        require(batch_size >= 1, "batch_size must be positive");
        require(lr_G > 0 && lr_D > 0, "learning rates must be positive");
        require(lr_floor > 0 && lr_floor < lr_G && lr_floor < lr_D, "lr_floor must lie below both learning rates");
        require(lr_decay > 0 && lr_decay <= 1 && lr_decay_steps >= 1, "invalid decay schedule");
        require(lambda_gan >= 0 && lambda_rec >= 0 && lambda_uni >= 0, "loss weights must be non-negative");
        require(patch_area_fraction > 0 && patch_area_fraction < 0.5, "patch_area_fraction must lie in (0, 0.5)");
        require(scale_min > 0 && scale_min <= scale_max, "invalid scale range");
        require(jitter_sigma >= 0, "jitter_sigma must be non-negative");
        require(knn_k >= 1 && knn_k <= N, "knn_k must lie in [1, N]");
        require(inference_overlap >= 1 && checkpoint_every >= 1 && d_steps_per_g >= 1, "counts must be positive");
    }
};

namespace detail {

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "config seed shares the size_t field path");
using FieldRef = std::variant<std::size_t*, double*, bool*>;

template <typename Config, typename F>
void visit_config(Config& c, F&& f) {
    f("N", &c.N);
    f("r", &c.r);
    f("M", &c.M);
    f("batch_size", &c.batch_size);
    f("epochs", &c.epochs);
    f("iterations", &c.iterations);
    f("lr_G", &c.lr_G);
    f("lr_D", &c.lr_D);
    f("lr_decay", &c.lr_decay);
    f("lr_decay_steps", &c.lr_decay_steps);
    f("lr_floor", &c.lr_floor);
    f("adam_beta1", &c.adam_beta1);
    f("adam_beta2", &c.adam_beta2);
    f("adam_epsilon", &c.adam_epsilon);
    f("d_steps_per_g", &c.d_steps_per_g);
    f("lambda_gan", &c.lambda_gan);
    f("lambda_rec", &c.lambda_rec);
    f("lambda_uni", &c.lambda_uni);
    f("auction_epsilon", &c.auction_epsilon);
    f("patches_per_mesh", &c.patches_per_mesh);
    f("min_patches_per_mesh", &c.min_patches_per_mesh);
    f("patch_area_fraction", &c.patch_area_fraction);
    f("pool_size", &c.pool_size);
    f("augment_rotation", &c.augment_rotation);
    f("augment_scale", &c.augment_scale);
    f("augment_jitter", &c.augment_jitter);
    f("jitter_sigma", &c.jitter_sigma);
    f("scale_min", &c.scale_min);
    f("scale_max", &c.scale_max);
    f("use_discriminator", &c.use_discriminator);
    f("use_uniform_loss", &c.use_uniform_loss);
    f("use_attention", &c.use_attention);
    f("use_up_down_up", &c.use_up_down_up);
    f("use_farthest_sampling", &c.use_farthest_sampling);
    f("C", &c.C);
    f("C_prime", &c.C_prime);
    f("C_d", &c.C_d);
    f("C_d_prime", &c.C_d_prime);
    f("grid_extent", &c.grid_extent);
    f("knn_k", &c.knn_k);
    f("regression_hidden", &c.regression_hidden);
    f("fps_seed_index", &c.fps_seed_index);
    f("inference_overlap", &c.inference_overlap);
    f("checkpoint_every", &c.checkpoint_every);
    f("seed", &c.seed);
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

inline void write_config(std::ostream& out, const TrainConfig& cfg) {
    auto& c = const_cast<TrainConfig&>(cfg);
    detail::visit_config(c, [&](const char* key, auto* field) {
        using T = std::remove_pointer_t<decltype(field)>;
        out << key << " = ";
        if constexpr (std::is_same_v<T, double>) out << detail::format_double(*field);
        else if constexpr (std::is_same_v<T, bool>) out << (*field ? "true" : "false");
        else out << *field;
        out << '\n';
    });
}

inline void write_config(const fs::path& path, const TrainConfig& cfg) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    write_config(out, cfg);
}

/// Applies `key = value` lines over `base`; unknown keys are errors.
inline TrainConfig read_config(std::istream& in, TrainConfig base = {}, const std::string& source = "<config>") {
    std::map<std::string, detail::FieldRef> fields;
    detail::visit_config(base, [&](const char* key, auto* field) { fields[key] = field; });
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        const auto eq = line.find('=');
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        if (trim(line).empty()) continue;
        auto fail = [&](const std::string& what) {
            throw Error(source + ":" + std::to_string(line_no) + ": " + what);
        };
        if (eq == std::string::npos) fail("expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto it = fields.find(key);
        if (it == fields.end()) fail("unknown key '" + key + "'");
        std::visit(
            [&](auto* field) {
                using T = std::remove_pointer_t<decltype(field)>;
                if constexpr (std::is_same_v<T, bool>) {
                    if (value == "true" || value == "1") *field = true;
                    else if (value == "false" || value == "0") *field = false;
                    else fail("expected boolean for '" + key + "'");
                } else {
                    std::istringstream vs(value);
                    T v{};
                    std::string rest;
                    if (!(vs >> v) || (vs >> rest)) fail("bad value for '" + key + "'");
                    if constexpr (!std::is_same_v<T, double>) {
                        if (value.front() == '-') fail("negative value for '" + key + "'");
                    }
                    *field = v;
                }
            },
            it->second);
    }
    return base;
}

inline TrainConfig read_config(const fs::path& path, TrainConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config '" + path.string() + "'");
    return read_config(in, base, path.string());
}

/// Names accepted by the ablation switch; "baseline" removes every
/// component except the discriminator.
inline void apply_ablation(TrainConfig& cfg, const std::string& component) {
    if (component == "discriminator") cfg.use_discriminator = false;
    else if (component == "uniform") cfg.use_uniform_loss = false;
    else if (component == "attention") cfg.use_attention = false;
    else if (component == "up-down-up") cfg.use_up_down_up = false;
    else if (component == "farthest-sampling") cfg.use_farthest_sampling = false;
    else if (component == "baseline") {
        cfg.use_uniform_loss = false;
        cfg.use_attention = false;
        cfg.use_up_down_up = false;
        cfg.use_farthest_sampling = false;
    } else {
        throw Error("unknown ablation '" + component + "'");
    }
}

/// Staircase decay by `lr_decay` every `lr_decay_steps` iterations
/// (1-based), never below `lr_floor`.
inline double scheduled_lr(double initial, std::size_t iteration, const TrainConfig& cfg) {
    const std::size_t stage = iteration == 0 ? 0 : (iteration - 1) / cfg.lr_decay_steps;
    return std::max(cfg.lr_floor, initial * std::pow(cfg.lr_decay, static_cast<double>(stage)));
}

/// splitmix64 finalizer; derives independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Random `count`-subset of `cloud` (order of first draw).
inline std::vector<std::size_t> random_subset(std::size_t size, std::size_t count, Rng& rng) {
    if (count > size) throw Error("random_subset: count exceeds size");
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (size - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    return idx;
}

// ---------------------------------------------------------------------------
// Training data

struct PatchPair {
    PointCloud input;   // N points drawn from target
    PointCloud target;  // rN points, unit-sphere normalized
    std::size_t mesh_id = 0;
    Normalization normalization;  // maps mesh coordinates into patch space
    Point3 seed;
};

struct MeshPatches {
    std::string name;
    std::vector<PatchPair> patches;
    std::size_t failures = 0;
};

/// Poisson-disk target for one geodesic patch: candidates are drawn from
/// the triangles under the patch and kept when their nearest pool point is
/// a patch member; sample elimination then reduces 5 rN candidates to rN.
inline std::optional<PointCloud> patch_target(const TriangleMesh& mesh, const PatchGrower& grower, const Patch& patch,
                                              std::size_t count, Rng& rng) {
    std::set<std::size_t> tri_set;
    for (const auto& s : patch.samples) tri_set.insert(s.triangle);
    std::vector<std::size_t> tris(tri_set.begin(), tri_set.end());
    std::vector<double> cumulative;
    double acc = 0.0;
    for (std::size_t t : tris) cumulative.push_back(acc += mesh.areas()[t]);
    std::vector<char> member(grower.pool().size(), 0);
    for (std::size_t i : patch.pool_indices) member[i] = 1;

    const std::size_t wanted = kPoissonPoolFactor * count;
    const std::size_t max_attempts = 200 * count;
    PointCloud candidates;
    candidates.reserve(wanted);
    for (std::size_t attempt = 0; attempt < max_attempts && candidates.size() < wanted; ++attempt) {
        const double u = uniform01(rng) * acc;
        const auto k = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        const std::size_t t = tris[std::min(k, tris.size() - 1)];
        const double u1 = uniform01(rng);
        const double u2 = uniform01(rng);
        const SurfaceSample s = sample_triangle(mesh, t, u1, u2);
        if (member[grower.graph().nearest_node(s.position)]) candidates.push_back(s.position);
    }
    if (candidates.size() < count) return std::nullopt;
    const double area = patch.area_fraction * mesh.total_area();
    return select(candidates, eliminate_samples(candidates, count, poisson_disk_radius(area, count)));
}

/// Seeds, geodesic patches and Poisson-disk targets for one mesh.
inline MeshPatches extract_patches(const TriangleMesh& mesh, const std::string& name, std::size_t mesh_id,
                                   const TrainConfig& cfg, std::ostream* log = &std::cerr) {
    const std::uint64_t base = mix_seed(cfg.seed, mesh_id);
    const PatchGrower grower(area_weighted_sample(mesh, cfg.pool_size, mix_seed(base, 0)));
    const auto seeds = area_weighted_sample(mesh, cfg.patches_per_mesh, mix_seed(base, 1));
    Rng rng(mix_seed(base, 2));
    const std::size_t target_count = cfg.r * cfg.N;
    MeshPatches out;
    out.name = name;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        try {
            const Patch patch = grower.grow(seeds[i], cfg.patch_area_fraction);
            auto target = patch_target(mesh, grower, patch, target_count, rng);
            if (!target) throw Error("too few candidates inside patch");
            const NormalizedCloud normalized = normalize_unit_sphere(*target);
            PatchPair pair;
            pair.target = normalized.cloud;
            pair.normalization = normalized.transform;
            pair.mesh_id = mesh_id;
            pair.seed = seeds[i].position;
            pair.input = select(pair.target, random_subset(pair.target.size(), cfg.N, rng));
            out.patches.push_back(std::move(pair));
        } catch (const Error& e) {
            ++out.failures;
            if (log) *log << "warning: " << name << " patch " << i << " skipped: " << e.what() << '\n';
        }
    }
    const std::size_t required = std::min(cfg.min_patches_per_mesh, cfg.patches_per_mesh);
    if (out.patches.size() < required)
        throw Error("mesh '" + name + "': only " + std::to_string(out.patches.size()) + " patches succeeded");
    return out;
}

struct NamedMesh {
    std::string name;
    TriangleMesh mesh;
};

inline std::vector<MeshPatches> build_dataset(const std::vector<NamedMesh>& meshes, const TrainConfig& cfg,
                                              std::ostream* log = &std::cerr) {
    cfg.validate();
    std::vector<MeshPatches> out;
    out.reserve(meshes.size());
    for (std::size_t i = 0; i < meshes.size(); ++i) out.push_back(extract_patches(meshes[i].mesh, meshes[i].name, i, cfg, log));
    return out;
}

inline std::vector<PatchPair> flatten(const std::vector<MeshPatches>& meshes) {
    std::vector<PatchPair> out;
    for (const auto& m : meshes) out.insert(out.end(), m.patches.begin(), m.patches.end());
    return out;
}

inline std::string patch_file(std::size_t index, const char* kind) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "patch_%04zu_%s.xyz", index, kind);
    return buf;
}

inline nlohmann::json point_json(const Point3& p) { return nlohmann::json::array({p.x, p.y, p.z}); }

/// One directory per mesh holding patch_%04d_{input,gt}.xyz and meta.json.
inline void write_archive(const fs::path& dir, const std::vector<MeshPatches>& meshes, const TrainConfig& cfg) {
    fs::create_directories(dir);
    for (std::size_t m = 0; m < meshes.size(); ++m) {
        const fs::path mesh_dir = dir / meshes[m].name;
        fs::create_directories(mesh_dir);
        nlohmann::json meta;
        meta["mesh"] = meshes[m].name;
        meta["mesh_id"] = m;
        meta["rng_seed"] = cfg.seed;
        meta["area_fraction"] = cfg.patch_area_fraction;
        meta["pool_size"] = cfg.pool_size;
        meta["N"] = cfg.N;
        meta["r"] = cfg.r;
        meta["failures"] = meshes[m].failures;
        auto& list = meta["patches"] = nlohmann::json::array();
        for (std::size_t i = 0; i < meshes[m].patches.size(); ++i) {
            const PatchPair& p = meshes[m].patches[i];
            write_xyz(mesh_dir / patch_file(i, "input"), p.input);
            write_xyz(mesh_dir / patch_file(i, "gt"), p.target);
            list.push_back({{"index", i},
                            {"seed", point_json(p.seed)},
                            {"centroid", point_json(p.normalization.centroid)},
                            {"scale", p.normalization.scale}});
        }
        std::ofstream out(mesh_dir / "meta.json", std::ios::binary);
        out << meta.dump(2) << '\n';
    }
}

inline std::vector<PatchPair> read_archive(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error("archive '" + dir.string() + "' is not a directory");
    std::vector<fs::path> mesh_dirs;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory() && fs::exists(e.path() / "meta.json")) mesh_dirs.push_back(e.path());
    std::sort(mesh_dirs.begin(), mesh_dirs.end());
    if (mesh_dirs.empty()) throw Error("archive '" + dir.string() + "' holds no mesh directories");
    std::vector<PatchPair> out;
    for (std::size_t m = 0; m < mesh_dirs.size(); ++m) {
        std::ifstream in(mesh_dirs[m] / "meta.json");
        nlohmann::json meta;
        try {
            meta = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw Error((mesh_dirs[m] / "meta.json").string() + ": " + e.what());
        }
        for (const auto& entry : meta.at("patches")) {
            const auto i = entry.at("index").get<std::size_t>();
            PatchPair p;
            p.mesh_id = m;
            p.input = read_xyz(mesh_dirs[m] / patch_file(i, "input"));
            p.target = read_xyz(mesh_dirs[m] / patch_file(i, "gt"));
            const auto c = entry.at("centroid");
            p.normalization = {{c[0].get<double>(), c[1].get<double>(), c[2].get<double>()},
                               entry.at("scale").get<double>()};
            const auto s = entry.at("seed");
            p.seed = {s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
            out.push_back(std::move(p));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Augmentation

/// Rotation matrix uniform over SO(3) (unit quaternion from three uniforms).
inline std::array<std::array<double, 3>, 3> random_rotation(Rng& rng) {
    const double u1 = uniform01(rng), u2 = uniform01(rng), u3 = uniform01(rng);
    const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    const double w = a * std::sin(2.0 * std::numbers::pi * u2);
    const double x = a * std::cos(2.0 * std::numbers::pi * u2);
    const double y = b * std::sin(2.0 * std::numbers::pi * u3);
    const double z = b * std::cos(2.0 * std::numbers::pi * u3);
    return {{{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
             {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
             {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}}};
}

/// Shared rotation and scale on both clouds; Gaussian jitter on the input
/// only, each displacement clipped to 3 sigma in length.
inline PatchPair augment(const PatchPair& pair, const TrainConfig& cfg, Rng& rng) {
    PatchPair out = pair;
    std::array<std::array<double, 3>, 3> rot{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    if (cfg.augment_rotation) rot = random_rotation(rng);
    double s = 1.0;
    if (cfg.augment_scale) s = std::uniform_real_distribution<double>(cfg.scale_min, cfg.scale_max)(rng);
    auto transform = [&](const Point3& p) {
        return Point3{s * (rot[0][0] * p.x + rot[0][1] * p.y + rot[0][2] * p.z),
                      s * (rot[1][0] * p.x + rot[1][1] * p.y + rot[1][2] * p.z),
                      s * (rot[2][0] * p.x + rot[2][1] * p.y + rot[2][2] * p.z)};
    };
    if (cfg.augment_rotation || cfg.augment_scale) {
        for (auto& p : out.input) p = transform(p);
        for (auto& p : out.target) p = transform(p);
    }
    if (cfg.augment_jitter && cfg.jitter_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, cfg.jitter_sigma);
        const double clip = 3.0 * cfg.jitter_sigma;
        for (auto& p : out.input) {
            Point3 d{noise(rng), noise(rng), noise(rng)};
            const double len = norm(d);
            if (len > clip) d = d * (clip / len);
            p += d;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training loop

struct LossRecord {
    std::size_t step = 0;
    double loss_G = 0.0;
    double loss_D = 0.0;
    double rec = 0.0;
    double uni = 0.0;
    double adv = 0.0;
    double d_real = 0.0;
    double d_fake = 0.0;
    double lr_G = 0.0;
    double lr_D = 0.0;
};

inline constexpr const char* kLossLogHeader = "step,L_G,L_D,rec,uni,adv,d_real,d_fake,lr_G,lr_D";

inline void write_loss_row(std::ostream& out, const LossRecord& r) {
    out << r.step;
    for (double v : {r.loss_G, r.loss_D, r.rec, r.uni, r.adv, r.d_real, r.d_fake, r.lr_G, r.lr_D})
        out << ',' << detail::format_double(v);
    out << '\n';
}

class TrainingError : public Error {
public:
    using Error::Error;
};

/// Generator and discriminator with their parameters.
struct PuGan {
    TrainConfig config;
    nn::ParamStore gen_params;
    nn::ParamStore dis_params;
    Generator generator;
    std::optional<Discriminator> discriminator;

    explicit PuGan(const TrainConfig& cfg)
        : config(cfg), generator(cfg.generator(), gen_params, mix_seed(cfg.seed, 100)) {
        if (cfg.use_discriminator) discriminator.emplace(cfg.discriminator(), dis_params, mix_seed(cfg.seed, 101));
    }

    PuGan(const PuGan&) = delete;
    PuGan& operator=(const PuGan&) = delete;
};

/// Alternating generator/discriminator optimization with two learning rates.
class Trainer {
public:
    Trainer(PuGan& model, std::vector<PatchPair> dataset)
        : model_(model), cfg_(model.config), data_(std::move(dataset)), rng_(mix_seed(cfg_.seed, 200)) {
        cfg_.validate();
        if (data_.empty()) throw Error("train: empty dataset");
        for (const auto& p : data_)
            if (p.target.size() != cfg_.r * cfg_.N)
                throw Error("train: patch has " + std::to_string(p.target.size()) + " target points, expected " +
                            std::to_string(cfg_.r * cfg_.N));
    }

    std::size_t total_iterations() const {
        if (cfg_.iterations > 0) return cfg_.iterations;
        const std::size_t per_epoch = (data_.size() + cfg_.batch_size - 1) / cfg_.batch_size;
        return per_epoch * cfg_.epochs;
    }

    std::size_t iteration() const noexcept { return iteration_; }

    /// One G step followed by the D step(s).
    LossRecord step() {
        ++iteration_;
        LossRecord rec;
        rec.step = iteration_;
        rec.lr_G = scheduled_lr(cfg_.lr_G, iteration_, cfg_);
        rec.lr_D = scheduled_lr(cfg_.lr_D, iteration_, cfg_);

        std::vector<PatchPair> batch;
        batch.reserve(cfg_.batch_size);
        for (std::size_t b = 0; b < cfg_.batch_size; ++b) {
            PatchPair pair = data_[next_index()];
            pair.input = select(pair.target, random_subset(pair.target.size(), cfg_.N, rng_));
            batch.push_back(augment(pair, cfg_, rng_));
        }

        const double inv_b = 1.0 / static_cast<double>(batch.size());
        const LossWeights w = cfg_.weights();
        const UniformLossConfig uni_cfg = cfg_.uniform();
        std::vector<Array2> fakes;
        fakes.reserve(batch.size());
        for (const auto& pair : batch) {
            const Tensor q = model_.generator(nn::constant(to_array(pair.input)));
            if (!q.value().allFinite()) check_finite(std::numeric_limits<double>::quiet_NaN(), "generator output", batch);
            fakes.push_back(q.value());
            const Tensor rec_loss = reconstruction_loss(q, pair.target, MatchingSolver::Auction, cfg_.auction_epsilon);
            const Tensor uni_loss = cfg_.use_uniform_loss ? uniform_loss(q, uni_cfg) : nn::constant(Array2::Zero(1, 1));
            Tensor adv_loss = nn::constant(Array2::Zero(1, 1));
            if (model_.discriminator) {
                const Tensor conf = (*model_.discriminator)(q);
                rec.d_fake += conf.item() * inv_b;
                adv_loss = adv_loss_G(conf);
            }
            LossWeights wb = w;
            if (!model_.discriminator) wb.gan = 0.0;
            const Tensor total = nn::scale(compound_G(adv_loss, rec_loss, uni_loss, wb), inv_b);
            rec.rec += rec_loss.item() * inv_b;
            rec.uni += uni_loss.item() * inv_b;
            rec.adv += adv_loss.item() * inv_b;
            rec.loss_G += total.item();
            check_finite(total.item(), "L_G", batch);
            nn::backward(total);
        }
        nn::adam_step(model_.gen_params, adam(rec.lr_G));
        lr_history_G_.push_back(rec.lr_G);

        if (model_.discriminator) {
            const Discriminator& dis = *model_.discriminator;
            model_.dis_params.zero_grad();
            for (std::size_t k = 0; k < cfg_.d_steps_per_g; ++k) {
                double loss_d = 0.0, d_real = 0.0;
                for (std::size_t b = 0; b < batch.size(); ++b) {
                    const Tensor fake = dis(nn::constant(fakes[b]));
                    const Tensor real = dis(nn::constant(to_array(batch[b].target)));
                    const Tensor loss = nn::scale(adv_loss_D(fake, real), inv_b);
                    loss_d += loss.item();
                    d_real += real.item() * inv_b;
                    check_finite(loss.item(), "L_D", batch);
                    nn::backward(loss);
                }
                nn::adam_step(model_.dis_params, adam(rec.lr_D));
                lr_history_D_.push_back(rec.lr_D);
                rec.loss_D = loss_d;
                rec.d_real = d_real;
            }
        }
        return rec;
    }

    /// Runs every iteration, writing loss_log.csv and ckpt_%06d/ under
    /// `out_dir` when given.
    std::vector<LossRecord> run(const std::optional<fs::path>& out_dir = std::nullopt) {
        std::ofstream log;
        if (out_dir) {
            out_dir_ = *out_dir;
            fs::create_directories(*out_dir);
            log.open(*out_dir / "loss_log.csv", std::ios::binary);
            log << kLossLogHeader << '\n';
        }
        std::vector<LossRecord> history;
        const std::size_t total = total_iterations();
        while (iteration_ < total) {
            history.push_back(step());
            if (out_dir) {
                write_loss_row(log, history.back());
                if (iteration_ % cfg_.checkpoint_every == 0 || iteration_ == total) save(*out_dir, iteration_);
            }
        }
        return history;
    }

    void save(const fs::path& out_dir, std::size_t iteration) const {
        char name[32];
        std::snprintf(name, sizeof(name), "ckpt_%06zu", iteration);
        const fs::path dir = out_dir / name;
        fs::create_directories(dir);
        nn::save_checkpoint(model_.gen_params, dir / "generator.ckpt");
        if (model_.discriminator) nn::save_checkpoint(model_.dis_params, dir / "discriminator.ckpt");
        write_config(dir / "config.txt", cfg_);
    }

    const std::vector<double>& lr_history_G() const noexcept { return lr_history_G_; }
    const std::vector<double>& lr_history_D() const noexcept { return lr_history_D_; }

private:
    nn::AdamOptions adam(double lr) const { return {lr, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_epsilon}; }

    std::size_t next_index() {
        if (cursor_ == order_.size()) {
            order_.resize(data_.size());
            std::iota(order_.begin(), order_.end(), std::size_t{0});
            std::shuffle(order_.begin(), order_.end(), rng_);
            cursor_ = 0;
        }
        return order_[cursor_++];
    }

    void check_finite(double value, const char* what, const std::vector<PatchPair>& batch) const {
        if (std::isfinite(value)) return;
        std::string where;
        if (!out_dir_.empty()) {
            const fs::path dump = out_dir_ / "nan_dump";
            fs::create_directories(dump);
            for (std::size_t b = 0; b < batch.size(); ++b) {
                write_xyz(dump / patch_file(b, "input"), batch[b].input);
                write_xyz(dump / patch_file(b, "gt"), batch[b].target);
            }
            where = "; batch dumped to " + dump.string();
        }
        throw TrainingError(std::string("non-finite ") + what + " at iteration " + std::to_string(iteration_) + where);
    }

    PuGan& model_;
    TrainConfig cfg_;
    std::vector<PatchPair> data_;
    Rng rng_;
    std::size_t iteration_ = 0;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    fs::path out_dir_;
    std::vector<double> lr_history_G_;
    std::vector<double> lr_history_D_;
};

/// Loads the generator from a `ckpt_%06d/` directory.
inline std::unique_ptr<PuGan> load_model(const fs::path& ckpt_dir) {
    const TrainConfig cfg = read_config(ckpt_dir / "config.txt");
    auto model = std::make_unique<PuGan>(cfg);
    nn::load_checkpoint(model->gen_params, ckpt_dir / "generator.ckpt");
    if (model->discriminator && fs::exists(ckpt_dir / "discriminator.ckpt"))
        nn::load_checkpoint(model->dis_params, ckpt_dir / "discriminator.ckpt");
    return model;
}

// ---------------------------------------------------------------------------
// Patch-based inference

/// Maps a normalized N-point patch to its rN-point upsampling.
using PatchUpsampler = std::function<PointCloud(const PointCloud&)>;

/// Farthest-point seeds (ceil(overlap * |input| / N) of them), N-nearest
/// patches, per-patch upsampling in normalized space, then a farthest-point
/// merge of the union down to r * |input| points. Inputs smaller than N run
/// as one patch padded with points at the centroid.
inline PointCloud upsample_cloud(const PointCloud& input, std::size_t N, std::size_t r, const PatchUpsampler& upsampler,
                                 std::size_t overlap = 3) {
    if (input.empty()) throw Error("upsample: empty input");
    if (N == 0 || r == 0 || overlap == 0) throw Error("upsample: N, r and overlap must be positive");
    const std::size_t wanted = r * input.size();
    PointCloud merged;
    auto run_patch = [&](const PointCloud& patch, std::size_t pad) {
        NormalizedCloud norm = normalize_unit_sphere(patch);
        for (std::size_t i = 0; i < pad; ++i) norm.cloud.push_back({0.0, 0.0, 0.0});
        const PointCloud up = upsampler(norm.cloud);
        for (const auto& p : up) merged.push_back(norm.transform.invert(p));
    };
    if (input.size() < N) {
        run_patch(input, N - input.size());
    } else {
        const std::size_t seeds =
            std::min(input.size(), (overlap * input.size() + N - 1) / N);
        const KdTree tree(input);
        for (std::size_t s : farthest_point_sampling(input, seeds, 0)) {
            std::vector<std::size_t> idx;
            idx.reserve(N);
            for (const auto& nb : tree.knn(input[s], N)) idx.push_back(nb.index);
            run_patch(select(input, idx), 0);
        }
    }
    if (merged.size() < wanted)
        throw Error("upsample: patches produced " + std::to_string(merged.size()) + " points, need " +
                    std::to_string(wanted));
    return select(merged, farthest_point_sampling(merged, wanted, 0));
}

inline PointCloud upsample_cloud(const PointCloud& input, const Generator& generator, std::size_t overlap = 3) {
    const GeneratorConfig& g = generator.config();
    return upsample_cloud(input, g.N, g.r, [&](const PointCloud& patch) { return generator.generate(patch); }, overlap);
}

}  // namespace pugan
