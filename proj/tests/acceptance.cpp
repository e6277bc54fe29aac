// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "support.hpp"

using namespace pugan;
using namespace pugan::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Every regular file under `dir`, relative path to contents.
std::map<std::string, std::string> tree_contents(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return out;
}

fs::path scratch_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("pugan_acceptance_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

PointCloud unit_ball_cloud(std::size_t n, std::uint64_t seed) {
    PointCloud c;
    Rng rng(seed);
    while (c.size() < n) {
        const Point3 p{2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1};
        if (squared_norm(p) <= 1.0) c.push_back(p);
    }
    return c;
}

// ---------------------------------------------------------------------------

Outcome emd_oracle() {
    const auto t0 = Clock::now();
    Rng rng(1);
    double worst_exact = 0.0;
    for (int i = 0; i < 200; ++i) {
        const std::size_t n = 1 + rng() % 7;
        const PointCloud a = random_cloud(n, rng()), b = random_cloud(n, rng());
        const double brute = brute_force_emd(a, b);
        worst_exact = std::max(worst_exact, std::abs(emd_exact(a, b).cost - brute) / std::max(brute, 1e-300));
    }
    double worst_ratio = 0.0;
    for (int i = 0; i < 50; ++i) {
        const std::size_t n = 8 + rng() % 505;
        const PointCloud a = random_cloud(n, rng()), b = random_cloud(n, rng());
        const double exact = emd_exact(a, b).cost;
        const double approx = emd_approx(a, b, 1e-3).cost;
        worst_ratio = std::max(worst_ratio, std::abs(approx - exact) / exact);
    }
    const double t = seconds_since(t0);
    // "exact" allows only floating-point summation-order differences
    return {worst_exact < 1e-12 && worst_ratio < 0.005 && t < 60.0,
            fmt("brute-force max rel diff %.2e, auction max rel gap %.4f%%, %.1f s", worst_exact, 100 * worst_ratio, t)};
}

Outcome gradient_suite() {
    using namespace pugan::nn;
    const auto t0 = Clock::now();
    std::vector<std::pair<std::string, double>> results;
    auto check = [&](const std::string& name, const std::function<Tensor()>& f, std::vector<Tensor> wrt) {
        results.emplace_back(name, gradient_error(f, std::move(wrt)));
    };
    auto shifted = [](Eigen::Index r, Eigen::Index c, std::uint64_t s) {
        Array2 a = random_array(r, c, s);
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] += a.data()[i] < 0 ? -0.1 : 0.1;
        return a;
    };
    Tensor a = variable(shifted(3, 4, 1)), b = variable(shifted(3, 4, 2));
    Tensor m = variable(random_array(4, 5, 3)), bias = variable(random_array(1, 5, 4));
    Tensor g = variable(random_array(6, 3, 5)), row = variable(random_array(1, 4, 6));
    check("add", [&] { return probe(add(a, b)); }, {a, b});
    check("sub", [&] { return probe(sub(a, b)); }, {a, b});
    check("mul", [&] { return probe(mul(a, b)); }, {a, b});
    check("scale", [&] { return probe(scale(a, 1.7)); }, {a});
    check("add_scalar", [&] { return probe(add_scalar(a, -0.4)); }, {a});
    check("square", [&] { return probe(square(a)); }, {a});
    check("relu", [&] { return probe(relu(a)); }, {a});
    check("sigmoid", [&] { return probe(sigmoid(a)); }, {a});
    check("matmul", [&] { return probe(matmul(a, m)); }, {a, m});
    check("transpose", [&] { return probe(transpose(a)); }, {a});
    check("linear", [&] { return probe(linear(a, m, bias)); }, {a, m, bias});
    check("softmax_rows", [&] { return probe(softmax_rows(a)); }, {a});
    check("softmax_cols", [&] { return probe(softmax_cols(a)); }, {a});
    check("concat_cols", [&] { return probe(concat_cols({a, b})); }, {a, b});
    check("reshape", [&] { return probe(reshape(a, 2, 6)); }, {a});
    check("tile_rows", [&] { return probe(tile_rows(row, 3)); }, {row});
    check("gather_rows", [&] { return probe(gather_rows(g, {5, 0, 5, 2})); }, {g});
    check("segment_max_rows", [&] { return probe(segment_max_rows(g, 2)); }, {g});
    check("max_over_rows", [&] { return probe(max_over_rows(g)); }, {g});
    check("sum_all", [&] { return sum_all(g); }, {g});
    check("mean_all", [&] { return mean_all(g); }, {g});
    check("row_norm", [&] { return probe(row_norm(g)); }, {g});

    {
        ParamStore store;
        Rng rng(7);
        const SelfAttention att(store, "att", 8, rng);
        randomize_biases(store);
        Tensor x = variable(random_array(6, 8, 8));
        auto wrt = all_parameters(store);
        wrt.push_back(x);
        check("self-attention", [&] { return probe(att(x)); }, wrt);
    }
    {
        ParamStore store;
        Rng rng(9);
        const UpFeature up(store, "up", 4, 3, 0.2, true, rng);
        randomize_biases(store);
        Tensor x = variable(random_array(5, 4, 10));
        auto wrt = all_parameters(store);
        wrt.push_back(x);
        check("up-feature", [&] { return probe(up(x)); }, wrt);
    }
    {
        ParamStore store;
        Rng rng(11);
        const DownFeature down(store, "down", 4, 4, 3, rng);
        randomize_biases(store);
        Tensor x = variable(random_array(15, 4, 12));
        auto wrt = all_parameters(store);
        wrt.push_back(x);
        check("down-feature", [&] { return probe(down(x)); }, wrt);
    }
    {
        ParamStore store;
        Rng rng(13);
        const UpDownUp unit(store, "udu", 4, 3, 0.2, true, true, rng);
        randomize_biases(store);
        Tensor x = variable(random_array(4, 4, 14));
        auto wrt = all_parameters(store);
        wrt.push_back(x);
        check("up-down-up", [&] { return probe(unit(x)); }, wrt);
    }
    {
        Tensor conf = variable(Array2::Constant(1, 1, 0.3)), real = variable(Array2::Constant(1, 1, 0.8));
        check("adversarial G", [&] { return adv_loss_G(conf); }, {conf});
        check("adversarial D", [&] { return adv_loss_D(conf, real); }, {conf, real});
        Tensor q = variable(to_array(unit_ball_cloud(64, 15)));
        UniformLossConfig ucfg;
        ucfg.seeds = 10;
        check("uniform", [&] { return uniform_loss(q, ucfg); }, {q});
        const PointCloud target = unit_ball_cloud(64, 16);
        check("reconstruction", [&] { return reconstruction_loss(q, target, MatchingSolver::Exact); }, {q});
    }
    double worst = 0.0;
    std::string worst_name;
    for (const auto& [name, err] : results)
        if (err >= worst) worst = err, worst_name = name;
    const double t = seconds_since(t0);
    return {worst < 1e-3 && t < 300.0,
            fmt("%zu checks, worst rel error %.2e (%s), %.1f s", results.size(), worst, worst_name.c_str(), t)};
}

Outcome uniform_discrimination() {
    const double hex = uniformity_loss_value_from(shapes::hexagonal_disk(625), 0.01, 50, 0);
    const double rnd = uniformity_loss_value_from(shapes::random_disk(625, 1), 0.01, 50, 0);
    const double clu = uniformity_loss_value_from(shapes::clustered_disk(625, 2), 0.01, 50, 0);
    const double d_hat = expected_spacing(0.1, 10);
    const double n_hat = 1024 * 0.01;
    const bool hand = std::abs(d_hat - std::sqrt(2 * std::numbers::pi * 0.01 / (10 * std::sqrt(3.0)))) < 1e-9 &&
                      std::abs(d_hat - 0.06023) < 5e-6 && std::abs(n_hat - 10.24) < 1e-9 &&
                      std::abs(imbalance(20, n_hat) - 9.3025) < 1e-9;
    return {hex < rnd && rnd < clu && hex < 0.5 * rnd && hand,
            fmt("hex %.4g < random %.4g < clustered %.4g; d_hat %.6f, n_hat %.4f", hex, rnd, clu, d_hat, n_hat)};
}

Outcome spatial_queries() {
    const auto t0 = Clock::now();
    const PointCloud cloud = random_cloud(2000, 21);
    const KdTree tree(cloud);
    const TriangleMesh mesh = shapes::torus(1.0, 0.35, 40, 20);
    const SurfaceDistance bvh(mesh);
    Rng rng(22);
    std::size_t mismatches = 0, queries = 0;
    for (int i = 0; i < 400; ++i, ++queries) {
        const Point3 q{2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1};
        const std::size_t k = 1 + rng() % 32;
        if (tree.knn(q, k) != brute_knn(cloud, q, k)) ++mismatches;
    }
    for (int i = 0; i < 300; ++i, ++queries) {
        const Point3 q = cloud[rng() % cloud.size()];
        const double r = 0.02 + 0.3 * uniform01(rng);
        if (tree.ball(q, r) != brute_ball(cloud, q, r)) ++mismatches;
    }
    for (int i = 0; i < 300; ++i, ++queries) {
        const Point3 q{3 * uniform01(rng) - 1.5, 3 * uniform01(rng) - 1.5, uniform01(rng) - 0.5};
        if (bvh.distance_to(q) != brute_p2f(mesh, q)) ++mismatches;
    }
    const double t = seconds_since(t0);
    return {mismatches == 0 && t < 30.0, fmt("%zu/%zu queries exact, %.2f s", queries - mismatches, queries, t)};
}

Outcome architecture() {
    const GeneratorConfig gcfg;
    nn::ParamStore gs;
    const Generator gen(gcfg, gs, 1);
    GeneratorTrace t;
    const Tensor out = gen(nn::constant(to_array(unit_ball_cloud(gcfg.N, 2))), &t);
    bool subset = static_cast<std::size_t>(t.candidates.rows()) == (gcfg.r + 2) * gcfg.N &&
                  static_cast<std::size_t>(out.rows()) == gcfg.r * gcfg.N &&
                  std::set<std::size_t>(t.selected.begin(), t.selected.end()).size() == t.selected.size();
    for (std::size_t i = 0; subset && i < t.selected.size(); ++i)
        subset = (out.value().row(static_cast<Eigen::Index>(i)).array() ==
                  t.candidates.value().row(static_cast<Eigen::Index>(t.selected[i])).array())
                     .all();

    nn::ParamStore ds;
    const Discriminator dis(DiscriminatorConfig{}, ds, 3);
    DiscriminatorTrace dt;
    const PointCloud q = unit_ball_cloud(1024, 4);
    nn::NoGradGuard guard;
    const double c1 = dis(nn::constant(to_array(q)), &dt).item();
    std::vector<std::size_t> perm(q.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), Rng(5));
    const double c2 = dis.confidence(select(q, perm));

    const bool widths = t.features.cols() == 480 && t.reduced.cols() == 128 && t.expanded.cols() == 128 &&
                        gs.get("gen/coords/0/w").cols() == 64 && dt.point_features.cols() == 64 &&
                        dt.global_features.cols() == 256;
    return {subset && widths && std::abs(c1 - c2) < 1e-9,
            fmt("%lld of %lld candidates kept, widths %lld/%lld/%lld/%lld, |D(Q)-D(perm Q)| = %.1e",
                static_cast<long long>(out.rows()), static_cast<long long>(t.candidates.rows()),
                static_cast<long long>(t.features.cols()), static_cast<long long>(t.reduced.cols()),
                static_cast<long long>(gs.get("gen/coords/0/w").cols()),
                static_cast<long long>(dt.global_features.cols()), std::abs(c1 - c2))};
}

// Generator trained by the overfit criterion, reused by the pipeline check.
std::unique_ptr<PuGan> g_overfit_model;

Outcome overfit() {
    const auto t0 = Clock::now();
    TrainConfig cfg = TrainConfig::desk();
    cfg.patches_per_mesh = 1;
    cfg.min_patches_per_mesh = 1;
    std::ostringstream log;
    const auto ds = build_dataset({{"torus", shapes::torus(1.0, 0.4, 48, 24).normalized()}}, cfg, &log);
    const PatchPair& pair = ds[0].patches[0];
    cfg.use_discriminator = false;
    cfg.use_uniform_loss = false;
    cfg.lambda_gan = 0.0;
    cfg.lambda_uni = 0.0;
    auto model = std::make_unique<PuGan>(cfg);
    const Tensor input = nn::constant(to_array(pair.input));
    double emd_now = emd_exact(model->generator.generate(pair.input), pair.target).normalized_cost();
    const double initial = emd_now;
    std::size_t step = 0;
    while (step < 2000 && emd_now >= 0.05) {
        ++step;
        const Tensor q = model->generator(input);
        nn::backward(nn::scale(reconstruction_loss(q, pair.target, MatchingSolver::Auction, cfg.auction_epsilon),
                               cfg.lambda_rec));
        nn::adam_step(model->gen_params, {cfg.lr_G, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon});
        if (step % 25 == 0) emd_now = emd_exact(model->generator.generate(pair.input), pair.target).normalized_cost();
    }
    g_overfit_model = std::move(model);
    const double t = seconds_since(t0);
    return {emd_now < 0.05 && t < 600.0,
            fmt("normalized EMD %.4f -> %.4f after %zu steps (64 -> 256 points), %.1f s", initial, emd_now, step, t)};
}

Outcome adversarial_smoke() {
    const auto t0 = Clock::now();
    TrainConfig cfg = TrainConfig::desk();
    cfg.patches_per_mesh = 10;
    cfg.iterations = 200;
    cfg.seed = 3;
    std::ostringstream log;
    const auto data = flatten(build_dataset({{"ball", shapes::icosphere(3).normalized()}}, cfg, &log));
    PuGan model(cfg);
    Trainer trainer(model, data);
    std::vector<LossRecord> history;
    try {
        history = trainer.run();
    } catch (const TrainingError& e) {
        return {false, e.what()};
    }
    auto mean = [&](std::size_t from, std::size_t to, auto field) {
        double s = 0.0;
        for (std::size_t i = from; i < to; ++i) s += field(history[i]);
        return s / static_cast<double>(to - from);
    };
    auto ld = [](const LossRecord& r) { return r.loss_D; };
    const std::size_t n = history.size();
    const double first = mean(0, 20, ld), last = mean(n - 20, n, ld);
    const double gap = mean(n - 10, n, [](const LossRecord& r) { return r.d_real - r.d_fake; });
    bool finite = true;
    for (const auto& r : history) finite = finite && std::isfinite(r.loss_G) && std::isfinite(r.loss_D);
    const double t = seconds_since(t0);
    return {finite && last < first && gap > 0.1,
            fmt("%zu patches, %zu iterations, L_D %.4f -> %.4f, D(real)-D(fake) %.3f, %.1f s", data.size(), n, first,
                last, gap, t)};
}

Outcome pipeline_count() {
    const auto t0 = Clock::now();
    if (!g_overfit_model) overfit();
    const TriangleMesh mesh = shapes::icosphere(3).normalized();
    const PointCloud input = positions(poisson_disk_sample(mesh, 2048, 31));
    const PointCloud up = upsample_cloud(input, g_overfit_model->generator, 3);
    const UniformityReport report = uniformity_report_mesh(up, mesh, kDefaultReportSeeds, 0);
    bool finite = true;
    for (double v : report.values) finite = finite && std::isfinite(v);
    const double t = seconds_since(t0);
    return {up.size() == 8192 && finite,
            fmt("%zu -> %zu points, report [%.3g %.3g %.3g %.3g %.3g], %.1f s", input.size(), up.size(),
                report.values[0], report.values[1], report.values[2], report.values[3], report.values[4], t)};
}

Outcome poisson_quality() {
    const auto t0 = Clock::now();
    const std::vector<std::pair<std::string, TriangleMesh>> meshes{
        {"sphere", shapes::icosphere(3).normalized()},
        {"torus", shapes::torus(1.0, 0.35, 48, 24).normalized()},
        {"cube", shapes::cube(8).normalized()}};
    bool ok = true;
    std::string detail;
    for (std::size_t i = 0; i < meshes.size(); ++i) {
        const auto& [name, mesh] = meshes[i];
        const PointCloud poisson = positions(poisson_disk_sample(mesh, 8192, 40 + i));
        const PointCloud random = positions(area_weighted_sample(mesh, 8192, 50 + i));
        const MeshUniformity metric(mesh, kDefaultPoolSize, 60 + i);
        const UniformityReport a = metric.evaluate(poisson, kDefaultReportSeeds, 70 + i);
        const UniformityReport b = metric.evaluate(random, kDefaultReportSeeds, 70 + i);
        double worst = 0.0;
        for (std::size_t p = 0; p < a.values.size(); ++p) {
            ok = ok && a.values[p] < b.values[p];
            worst = std::max(worst, a.values[p] / b.values[p]);
        }
        detail += fmt("%s worst ratio %.3f; ", name.c_str(), worst);
    }
    detail += fmt("%.1f s", seconds_since(t0));
    return {ok, detail};
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(PUGAN_CLI) + " " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
    const auto t0 = Clock::now();
    const fs::path root = scratch_dir("determinism");
    const fs::path meshes = root / "meshes";
    fs::create_directories(meshes);
    {
        std::ofstream a(meshes / "ball.off", std::ios::binary), b(meshes / "ring.off", std::ios::binary);
        write_off(a, shapes::icosphere(2));
        write_off(b, shapes::torus(1.0, 0.35, 32, 16));
    }
    std::vector<std::map<std::string, std::string>> archives, runs;
    double prepare_time = 0.0;
    for (int run = 0; run < 2; ++run) {
        const fs::path data = root / ("data" + std::to_string(run));
        const fs::path out = root / ("train" + std::to_string(run));
        const auto tp = Clock::now();
        const std::string seed = "--seed 5";
        if (run_cli("prepare --profile desk --meshes " + meshes.string() + " --out " + data.string() + " " + seed,
                    root / "prepare.log") != 0)
            return {false, "prepare failed: " + slurp(root / "prepare.log")};
        prepare_time = std::max(prepare_time, seconds_since(tp));
        if (run_cli("train --profile desk --data " + data.string() + " --out " + out.string() + " " +
                        seed,
                    root / "train.log") != 0)
            return {false, "train failed: " + slurp(root / "train.log")};
        archives.push_back(tree_contents(data));
        runs.push_back(tree_contents(out));
    }
    const bool same = archives[0] == archives[1] && runs[0] == runs[1] && !archives[0].empty() && !runs[0].empty();
    const double t = seconds_since(t0);
    fs::remove_all(root);
    return {same, fmt("archive %zu files, training %zu files, byte-identical: %s; prepare %.1f s, total %.1f s",
                      archives[0].size(), runs[0].size(), same ? "yes" : "no", prepare_time, t)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
        {"EMD oracle equivalence", emd_oracle},
        {"gradient suite", gradient_suite},
        {"uniform-loss discrimination", uniform_discrimination},
        {"spatial-query exactness", spatial_queries},
        {"architecture contracts", architecture},
        {"overfit sanity", overfit},
        {"adversarial smoke", adversarial_smoke},
        {"pipeline count contract", pipeline_count},
        {"Poisson-disk quality", poisson_quality},
        {"determinism", determinism}};
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!wanted.empty() && !wanted.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
