// Command-line front end. Links the C API only.
//
// Exit codes: 0 success, 1 verification failure, 2 input error, 3 numeric
// failure.

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "unist/unist.h"

namespace {

int fail_with(int status, char* err) {
    if (err) {
        std::fprintf(stderr, "error: %s\n", err);
        unist_string_free(err);
    }
    return status == UNIST_OK ? 1 : status;
}

int parse_variant(const std::string& v) {
    if (v == "standard") return 0;
    if (v == "a") return 1;
    if (v == "b") return 2;
    throw CLI::ValidationError("--variant must be standard, a or b");
}

std::vector<int32_t> parse_grid(const std::string& list) {
    std::vector<int32_t> out;
    std::string token;
    for (char c : list + ",") {
        if (c == ',') {
            if (!token.empty()) out.push_back(std::stoi(token));
            token.clear();
        } else {
            token += c;
        }
    }
    return out;
}

struct ModeFlags {
    bool unimodal = false;
    bool no_interaction = false;
    std::string variant = "standard";
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"unified image/video style transfer: stylize, verify, bench, traincheck"};
    app.require_subcommand(1);

    uint64_t seed = 0;
    app.add_option("--seed", seed, "rng seed for weight init and toy data")->capture_default_str();

    // ---- stylize ----
    auto* stylize = app.add_subcommand("stylize", "stylize content frames against a style image");
    std::vector<std::string> content_paths;
    std::string style_path, out_dir, checkpoint;
    ModeFlags mode;
    unist_config cfg;
    unist_config_defaults(&cfg);
    int frames_expected = 0;
    stylize->add_option("content", content_paths, "content frame PPMs, video half first")
        ->required();
    stylize->add_option("--style", style_path, "style image PPM")->required();
    stylize->add_option("--out", out_dir, "output directory")->required();
    stylize->add_option("--checkpoint", checkpoint, "parameter checkpoint to load");
    stylize->add_option("--frames", frames_expected, "expected frame count (checked)");
    stylize->add_flag("--unimodal", mode.unimodal, "single-modality interaction path");
    stylize->add_flag("--no-interaction", mode.no_interaction, "disable video-image interaction");
    stylize->add_option("--variant", mode.variant, "axial wiring: standard|a|b");
    stylize->add_option("--embed-dim", cfg.embed_dim, "token dim")->capture_default_str();
    stylize->add_option("--heads", cfg.heads, "attention heads")->capture_default_str();
    stylize->add_option("--base-channels", cfg.codec_base_channels, "codec width")
        ->capture_default_str();

    // ---- verify ----
    auto* verify = app.add_subcommand("verify", "run verification suites");
    std::string suite = "all";
    verify->add_option("suite", suite, "amsa|grads|flops|losses|determinism|all")
        ->capture_default_str();

    // ---- bench ----
    auto* bench = app.add_subcommand("bench", "analytic attention-cost sweep");
    std::string grid = "8,16,32,64";
    std::string bench_out;
    bool paper_row = false;
    int bench_dim = 512, bench_heads = 8;
    bench->add_option("--grid", grid, "comma list of square grid sizes")->capture_default_str();
    bench->add_option("--out", bench_out, "directory for sweep.csv / sweep.json (default stdout)");
    bench->add_flag("--paper-row", paper_row, "annotate with the published 32x32/D=512 figures");
    bench->add_option("--embed-dim", bench_dim, "token dim")->capture_default_str();
    bench->add_option("--heads", bench_heads, "attention heads")->capture_default_str();

    // ---- traincheck ----
    auto* traincheck = app.add_subcommand("traincheck", "toy overfit run on procedural data");
    int steps = 200;
    double lr = 0.0;
    std::string dims = "64x64";
    std::string train_out;
    int total_frames = 4;
    traincheck->add_option("--steps", steps, "training steps")->capture_default_str();
    traincheck->add_option("--lr", lr, "learning rate (default 1e-3)");
    traincheck->add_option("--dims", dims, "toy image size HxW (square)")->capture_default_str();
    traincheck->add_option("--frames", total_frames, "content frames, half video half image")
        ->capture_default_str();
    traincheck->add_option("--out", train_out, "directory for curve.csv and checkpoint.udit");

    CLI11_PARSE(app, argc, argv);

    char* err = nullptr;

    if (*stylize) {
        if (frames_expected > 0 && static_cast<size_t>(frames_expected) != content_paths.size()) {
            std::fprintf(stderr, "error: --frames %d but %zu content paths given\n",
                         frames_expected, content_paths.size());
            return UNIST_ERR_INPUT;
        }
        unist_model* model = nullptr;
        if (!checkpoint.empty()) {
            model = unist_model_load(checkpoint.c_str(), &err);
        } else {
            model = unist_model_create(&cfg, seed, &err);
        }
        if (!model) return fail_with(UNIST_ERR_INPUT, err);
        int variant_code;
        try {
            variant_code = parse_variant(mode.variant);
        } catch (const CLI::ValidationError& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            unist_model_free(model);
            return UNIST_ERR_INPUT;
        }
        int status = unist_model_set_mode(model, mode.no_interaction ? 0 : 1,
                                          mode.unimodal ? 1 : 0, variant_code, &err);
        if (status != UNIST_OK) {
            unist_model_free(model);
            return fail_with(status, err);
        }
        std::vector<const char*> paths;
        for (const auto& p : content_paths) paths.push_back(p.c_str());
        unist_metrics metrics;
        status = unist_stylize(model, paths.data(), paths.size(), style_path.c_str(),
                               out_dir.c_str(), &metrics, &err);
        unist_model_free(model);
        if (status != UNIST_OK) return fail_with(status, err);
        std::printf("wrote %zu stylized frames to %s\n", paths.size(), out_dir.c_str());
        std::printf("d_c=%.6g d_s=%.6g gram=%.6g color=%.6g\n", metrics.d_c, metrics.d_s,
                    metrics.gram_texture_diff, metrics.color_diff);
        return 0;
    }

    if (*verify) {
        char* report = nullptr;
        const int status = unist_verify(suite.c_str(), &report, &err);
        if (report) {
            std::fputs(report, stdout);
            unist_string_free(report);
        }
        if (status == UNIST_ERR_VERIFY) {
            std::fprintf(stderr, "verification FAILED\n");
            return UNIST_ERR_VERIFY;
        }
        if (status != UNIST_OK) return fail_with(status, err);
        std::printf("all checks passed\n");
        return 0;
    }

    if (*bench) {
        std::vector<int32_t> sizes;
        try {
            sizes = parse_grid(grid);
        } catch (const std::exception&) {
            std::fprintf(stderr, "error: bad --grid list '%s'\n", grid.c_str());
            return UNIST_ERR_INPUT;
        }
        std::string csv_path, json_path;
        if (!bench_out.empty()) {
            csv_path = bench_out + "/sweep.csv";
            json_path = bench_out + "/sweep.json";
            std::error_code ec;
            std::filesystem::create_directories(bench_out, ec);
        }
        char* report = nullptr;
        const int status =
            unist_bench(sizes.data(), sizes.size(), bench_dim, bench_heads, paper_row ? 1 : 0,
                        csv_path.empty() ? nullptr : csv_path.c_str(),
                        json_path.empty() ? nullptr : json_path.c_str(), &report, &err);
        if (status != UNIST_OK) return fail_with(status, err);
        if (bench_out.empty() && report) std::fputs(report, stdout);
        if (report) unist_string_free(report);
        if (paper_row) std::printf("paper: 4.29G / 0.27G (published msa/amsa at 32x32, d=512)\n");
        return 0;
    }

    if (*traincheck) {
        int h = 0, w = 0;
        if (std::sscanf(dims.c_str(), "%dx%d", &h, &w) != 2 || h != w || h < 8) {
            std::fprintf(stderr, "error: --dims must be a square HxH size, got '%s'\n",
                         dims.c_str());
            return UNIST_ERR_INPUT;
        }
        if (total_frames < 2 || total_frames % 2 != 0) {
            std::fprintf(stderr, "error: --frames must be even and >= 2\n");
            return UNIST_ERR_INPUT;
        }
        std::string curve_path, ckpt_path;
        if (!train_out.empty()) {
            std::error_code ec;
            std::filesystem::create_directories(train_out, ec);
            curve_path = train_out + "/curve.csv";
            ckpt_path = train_out + "/checkpoint.udit";
        }
        double initial = 0.0, final_loss = 0.0;
        const int status = unist_traincheck(
            nullptr, seed, steps, lr, h, curve_path.empty() ? nullptr : curve_path.c_str(),
            ckpt_path.empty() ? nullptr : ckpt_path.c_str(), &initial, &final_loss, &err);
        if (status != UNIST_OK) return fail_with(status, err);
        std::printf("steps=%d initial=%.6g final=%.6g ratio=%.4f\n", steps, initial, final_loss,
                    final_loss / initial);
        return 0;
    }

    return 0;
}
