// Command-line front end: prepare, train, upsample, eval, uniformity-demo.
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pugan/pugan.hpp"

namespace fs = std::filesystem;
using namespace pugan;

namespace {

// Thrown for bad flag combinations discovered after parsing.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

TrainConfig profile_config(const std::string& name) {
    if (name == "desk") return TrainConfig::desk();
    if (name == "full") return TrainConfig::full();
    throw UsageError("unknown profile '" + name + "' (expected desk or full)");
}

std::vector<fs::path> mesh_files(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::string ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".off" || ext == ".ply") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareArgs {
    std::string meshes, out, profile = "full";
    std::size_t patches = 0, N = 0, r = 0;
    std::uint64_t seed = 0;
};

int run_prepare(const PrepareArgs& a) {
    TrainConfig cfg = profile_config(a.profile);
    if (a.patches) cfg.patches_per_mesh = a.patches;
    if (a.N) cfg.N = a.N;
    if (a.r) cfg.r = a.r;
    cfg.seed = a.seed;
    cfg.validate();

    const auto files = mesh_files(a.meshes);
    if (files.empty()) throw UsageError("no .off or .ply meshes in '" + a.meshes + "'");
    std::vector<MeshPatches> done;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
        const std::string name = files[i].stem().string();
        try {
            done.push_back(extract_patches(load_mesh(files[i]), name, i, cfg, &std::cerr));
            std::cerr << name << ": " << done.back().patches.size() << " patches\n";
        } catch (const Error& e) {
            ++failed;
            std::cerr << "warning: mesh " << name << " failed: " << e.what() << '\n';
        }
    }
    write_archive(a.out, done, cfg);
    if (failed) throw Error(std::to_string(failed) + " mesh(es) produced no usable patches");
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string data, out, config, profile = "full";
    std::vector<std::string> ablate;
    std::uint64_t seed = 0;
    std::size_t iterations = 0;
};

int run_train(const TrainArgs& a) {
    TrainConfig cfg = profile_config(a.profile);
    if (!a.config.empty()) cfg = read_config(fs::path(a.config), cfg);
    for (const auto& c : a.ablate) apply_ablation(cfg, c);
    cfg.seed = a.seed;
    if (a.iterations) cfg.iterations = a.iterations;

    std::vector<PatchPair> data = read_archive(a.data);
    if (data.front().input.size() != cfg.N || data.front().target.size() != cfg.N * cfg.r)
        throw Error("train: archive patches are " + std::to_string(data.front().input.size()) + " -> " +
                    std::to_string(data.front().target.size()) + " points but the config expects " +
                    std::to_string(cfg.N) + " -> " + std::to_string(cfg.N * cfg.r));
    PuGan model(cfg);
    Trainer trainer(model, std::move(data));
    std::cerr << "training " << trainer.total_iterations() << " iterations, G parameters "
              << model.gen_params.parameter_count() << ", D parameters " << model.dis_params.parameter_count() << '\n';
    const auto history = trainer.run(fs::path(a.out));
    if (!history.empty())
        std::cerr << "final L_G " << history.back().loss_G << " L_D " << history.back().loss_D << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// upsample

int run_upsample(const std::string& in, const std::string& ckpt, const std::string& out, std::size_t overlap) {
    const PointCloud input = read_xyz(fs::path(in));
    const auto model = load_model(ckpt);
    const PointCloud up = upsample_cloud(input, model->generator, overlap);
    write_xyz(fs::path(out), up);
    std::cerr << input.size() << " -> " << up.size() << " points\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string pred, mesh, gt, out, name;
    std::size_t seeds = kDefaultReportSeeds;
    std::uint64_t seed = 0;
};

int run_eval(const EvalArgs& a) {
    const PointCloud pred = read_xyz(fs::path(a.pred));
    const PointCloud gt = read_xyz(fs::path(a.gt));
    const TriangleMesh mesh = load_mesh(a.mesh);
    EvaluationRow row;
    row.model = a.name.empty() ? fs::path(a.pred).stem().string() : a.name;
    row.chamfer = chamfer_distance(pred, gt);
    row.hausdorff = hausdorff_distance(pred, gt);
    row.p2f = point_to_surface(pred, mesh);
    row.uniformity = uniformity_report_mesh(pred, mesh, a.seeds, a.seed);

    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw Error("cannot write '" + a.out + "'");
    out << kReportHeader << '\n';
    write_report_row(out, row);
    if (!out) throw Error("write failed for '" + a.out + "'");

    std::printf("%-10s %14s %14s\n", "metric", "raw", "x1e3");
    auto show = [](const char* k, double v) { std::printf("%-10s %14.6g %14.6g\n", k, v, v * 1e3); };
    show("CD", row.chamfer);
    show("HD", row.hausdorff);
    show("P2F_mean", row.p2f.mean);
    show("P2F_max", row.p2f.max);
    const char* uni[] = {"uni_0.4", "uni_0.6", "uni_0.8", "uni_1.0", "uni_1.2"};
    for (std::size_t i = 0; i < 5; ++i) show(uni[i], row.uniformity.values[i]);
    return 0;
}

// ---------------------------------------------------------------------------
// uniformity-demo

void write_svg(const fs::path& path, const PointCloud& pts, const std::string& title) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    constexpr double size = 400.0, half = size / 2.0, radius = 180.0;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"400\" height=\"430\" viewBox=\"0 0 400 430\">\n"
        << "<rect width=\"400\" height=\"430\" fill=\"white\"/>\n"
        << "<circle cx=\"200\" cy=\"200\" r=\"180\" fill=\"none\" stroke=\"#bbb\"/>\n";
    char buf[128];
    for (const auto& p : pts) {
        std::snprintf(buf, sizeof(buf), "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2\" fill=\"#1f4e99\"/>\n",
                      half + radius * p.x, half - radius * p.y);
        out << buf;
    }
    out << "<text x=\"200\" y=\"420\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">" << title
        << "</text>\n</svg>\n";
}

int run_uniformity_demo(const std::string& dir, std::uint64_t seed) {
    constexpr std::size_t count = 625;
    constexpr double p = 0.01;
    fs::create_directories(dir);
    struct Pattern {
        const char* name;
        PointCloud points;
        double loss = 0.0;
    };
    std::vector<Pattern> patterns{{"clustered", shapes::clustered_disk(count, mix_seed(seed, 1))},
                                  {"random", shapes::random_disk(count, mix_seed(seed, 2))},
                                  {"hexagonal", shapes::hexagonal_disk(count)}};
    std::ofstream csv(fs::path(dir) / "uniformity.csv", std::ios::binary);
    csv << "pattern,points,p,L_uni\n";
    for (auto& pat : patterns) {
        pat.loss = uniformity_loss_value_from(pat.points, p, 50, 0);
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%s,%zu,%.3g,%.17g\n", pat.name, pat.points.size(), p, pat.loss);
        csv << buf;
        std::snprintf(buf, sizeof(buf), "%s (L_uni = %.4g)", pat.name, pat.loss);
        write_svg(fs::path(dir) / (std::string(pat.name) + ".svg"), pat.points, buf);
        std::printf("%-10s %.6g\n", pat.name, pat.loss);
    }
    if (!(patterns[0].loss > patterns[1].loss && patterns[1].loss > patterns[2].loss))
        throw Error("uniformity ordering clustered > random > hexagonal does not hold");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Point cloud upsampling: data preparation, training, inference and evaluation"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    PrepareArgs prep;
    auto* prepare = app.add_subcommand("prepare", "Extract training patch pairs from a directory of meshes");
    prepare->add_option("--meshes", prep.meshes, "Directory of .off/.ply meshes")->required()->check(CLI::ExistingDirectory);
    prepare->add_option("--out", prep.out, "Output archive directory")->required();
    prepare->add_option("--patches-per-mesh", prep.patches, "Seed positions per mesh (profile default: 200 full, 10 desk)");
    prepare->add_option("--N", prep.N, "Input points per patch (profile default: 256 full, 64 desk)");
    prepare->add_option("--r", prep.r, "Upsampling rate (default 4)");
    prepare->add_option("--profile", prep.profile, "Base profile: full or desk")
        ->capture_default_str()
        ->check(CLI::IsMember({"full", "desk"}));
    prepare->add_option("--seed", prep.seed, "Random seed")->capture_default_str();

    TrainArgs tr;
    auto* train = app.add_subcommand("train", "Train generator and discriminator on a patch archive");
    train->add_option("--data", tr.data, "Patch archive directory written by prepare")->required()->check(CLI::ExistingDirectory);
    train->add_option("--out", tr.out, "Output directory for checkpoints and loss_log.csv")->required();
    train->add_option("--config", tr.config, "key = value config file applied over the profile")->check(CLI::ExistingFile);
    train->add_option("--profile", tr.profile, "Base profile: full or desk")
        ->capture_default_str()
        ->check(CLI::IsMember({"full", "desk"}));
    train->add_option("--ablate", tr.ablate,
                      "Remove a component (repeatable): discriminator, uniform, attention, up-down-up, "
                      "farthest-sampling, baseline")
        ->check(CLI::IsMember({"discriminator", "uniform", "attention", "up-down-up", "farthest-sampling", "baseline"}));
    train->add_option("--iterations", tr.iterations, "Override the iteration count");
    train->add_option("--seed", tr.seed, "Random seed")->capture_default_str();

    std::string up_in, up_ckpt, up_out;
    std::size_t overlap = 3;
    std::uint64_t up_seed = 0;
    auto* upsample = app.add_subcommand("upsample", "Upsample a point cloud with a trained generator");
    upsample->add_option("--in", up_in, "Input .xyz cloud")->required()->check(CLI::ExistingFile);
    upsample->add_option("--ckpt", up_ckpt, "Checkpoint directory (ckpt_NNNNNN)")->required()->check(CLI::ExistingDirectory);
    upsample->add_option("--out", up_out, "Output .xyz cloud")->required();
    upsample->add_option("--overlap", overlap, "Patch overlap factor")->capture_default_str()->check(CLI::PositiveNumber);
    upsample->add_option("--seed", up_seed, "Random seed (inference is deterministic; accepted for uniformity)");

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "Score an upsampled cloud against ground truth and its mesh");
    eval->add_option("--pred", ev.pred, "Predicted .xyz cloud")->required()->check(CLI::ExistingFile);
    eval->add_option("--mesh", ev.mesh, "Ground-truth mesh (.off/.ply)")->required()->check(CLI::ExistingFile);
    eval->add_option("--gt", ev.gt, "Ground-truth .xyz cloud")->required()->check(CLI::ExistingFile);
    eval->add_option("--out", ev.out, "Report CSV")->required();
    eval->add_option("--name", ev.name, "Model name for the report row (default: stem of --pred)");
    eval->add_option("--seeds", ev.seeds, "Seed points for the uniformity report")->capture_default_str()->check(CLI::PositiveNumber);
    eval->add_option("--seed", ev.seed, "Random seed")->capture_default_str();

    std::string demo_out;
    std::uint64_t demo_seed = 0;
    auto* demo = app.add_subcommand("uniformity-demo", "Score clustered, random and hexagonal 625-point patterns");
    demo->add_option("--out", demo_out, "Output directory for uniformity.csv and SVG plots")->required();
    demo->add_option("--seed", demo_seed, "Random seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*prepare) return run_prepare(prep);
        if (*train) return run_train(tr);
        if (*upsample) return run_upsample(up_in, up_ckpt, up_out, overlap);
        if (*eval) return run_eval(ev);
        if (*demo) return run_uniformity_demo(demo_out, demo_seed);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "error: " << msg << '\n';
        return 1;
    }
    return 2;
}
