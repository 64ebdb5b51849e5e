#include "unist/unist.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "core/bench.hpp"
#include "core/codec.hpp"
#include "core/model.hpp"
#include "core/ops.hpp"
#include "core/trainer.hpp"
#include "core/verify.hpp"

using namespace unist;

struct unist_model {
    Model impl;
};

namespace {

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void set_err(char** errptr, const std::string& msg) {
    if (errptr) *errptr = dup_string(msg);
}

int status_for_exception(const std::exception& e, char** errptr) {
    set_err(errptr, e.what());
    if (dynamic_cast<const NumericError*>(&e) || dynamic_cast<const DeterminismError*>(&e)) {
        return UNIST_ERR_NUMERIC;
    }
    return UNIST_ERR_INPUT;
}

ModelConfig to_model_config(const unist_config& c) {
    ModelConfig cfg;
    cfg.dit.n_c = c.n_c;
    cfg.dit.n_s = c.n_s;
    cfg.dit.n_t = c.n_t;
    cfg.dit.embed_dim = c.embed_dim;
    cfg.dit.heads = c.heads;
    cfg.dit.interaction_enabled = c.interaction_enabled != 0;
    cfg.dit.unimodal = c.unimodal != 0;
    if (c.variant < 0 || c.variant > 2) throw ConfigError("config: variant must be 0, 1 or 2");
    cfg.dit.variant = static_cast<AmsaVariant>(c.variant);
    cfg.codec_base_channels = c.codec_base_channels;
    return cfg;
}

}  // namespace

extern "C" {

void unist_config_defaults(unist_config* cfg) {
    if (!cfg) return;
    *cfg = unist_config{2, 1, 3, 512, 8, 1, 0, 0, 64};
}

void unist_config_test_defaults(unist_config* cfg) {
    if (!cfg) return;
    *cfg = unist_config{2, 1, 3, 16, 2, 1, 0, 0, 4};
}

unist_model* unist_model_create(const unist_config* cfg, uint64_t seed, char** errptr) {
    try {
        unist_config c;
        unist_config_defaults(&c);
        if (cfg) c = *cfg;
        return new unist_model{Model::init(to_model_config(c), seed)};
    } catch (const std::exception& e) {
        set_err(errptr, e.what());
        return nullptr;
    }
}

unist_model* unist_model_load(const char* checkpoint_path, char** errptr) {
    try {
        if (!checkpoint_path) throw IoError("load: null checkpoint path");
        return new unist_model{Model::load(checkpoint_path)};
    } catch (const std::exception& e) {
        set_err(errptr, e.what());
        return nullptr;
    }
}

int unist_model_save(const unist_model* model, const char* checkpoint_path, char** errptr) {
    try {
        if (!model || !checkpoint_path) throw IoError("save: null model or path");
        model->impl.save(checkpoint_path);
        return UNIST_OK;
    } catch (const std::exception& e) {
        return status_for_exception(e, errptr);
    }
}

void unist_model_free(unist_model* model) { delete model; }

int unist_model_set_mode(unist_model* model, int32_t interaction_enabled, int32_t unimodal,
                         int32_t variant, char** errptr) {
    try {
        if (!model) throw ConfigError("set_mode: null model");
        if (interaction_enabled >= 0) {
            model->impl.cfg.dit.interaction_enabled = interaction_enabled != 0;
        }
        if (unimodal >= 0) model->impl.cfg.dit.unimodal = unimodal != 0;
        if (variant >= 0) {
            if (variant > 2) throw ConfigError("set_mode: variant must be 0, 1 or 2");
            model->impl.cfg.dit.variant = static_cast<AmsaVariant>(variant);
        }
        return UNIST_OK;
    } catch (const std::exception& e) {
        return status_for_exception(e, errptr);
    }
}

int unist_stylize(const unist_model* model, const char* const* content_paths, size_t n_content,
                  const char* style_path, const char* out_dir, unist_metrics* out_metrics,
                  char** errptr) {
    try {
        if (!model) throw ConfigError("stylize: null model");
        if (!content_paths || n_content < 1) throw IoError("stylize: no content frames given");
        if (!style_path || !out_dir) throw IoError("stylize: missing style path or output dir");

        std::vector<Tensor> frames;
        for (size_t i = 0; i < n_content; ++i) {
            frames.push_back(read_ppm(content_paths[i]));
            if (frames.back().shape() != frames[0].shape()) {
                throw ShapeError(std::string("stylize: frame sizes differ (") + content_paths[i] +
                                 ")");
            }
        }
        const Tensor style = read_ppm(style_path);
        if (style.dim(2) != frames[0].dim(2) || style.dim(3) != frames[0].dim(3)) {
            throw ShapeError("stylize: style dims must match content dims");
        }
        const Tensor content = frames.size() == 1 ? frames[0] : concat(frames, 0);
        if (content.dim(2) % 8 != 0 || content.dim(3) % 8 != 0) {
            throw ShapeError("stylize: image dims must divide 8, got " +
                             shape_str(content.shape()));
        }
        const DitConfig& dit_cfg = model->impl.cfg.dit;
        if (dit_cfg.interaction_enabled && !dit_cfg.unimodal && n_content % 2 != 0) {
            throw ConfigError(
                "stylize: bimodal interaction needs an even frame count; "
                "pass --unimodal for a single modality");
        }

        std::filesystem::create_directories(out_dir);
        const StylizeResult result = model->impl.stylize(content, style);
        for (size_t i = 0; i < n_content; ++i) {
            char name[64];
            std::snprintf(name, sizeof(name), "stylized_%03zu.ppm", i);
            write_ppm(narrow(result.images, 0, static_cast<int>(i), 1),
                      std::string(out_dir) + "/" + name);
        }

        char buf[640];
        std::snprintf(buf, sizeof(buf),
                      "{\n  \"schema\": 1,\n  \"d_c\": %.17g,\n  \"d_s\": %.17g,\n"
                      "  \"gram_texture_diff\": %.17g,\n  \"color_diff\": %.17g,\n"
                      "  \"conventions\": \"metrics on [0,1]-clamped outputs; d_c/d_s are "
                      "per-frame sums over taps 1-4, averaged over frames\"\n}\n",
                      result.metrics.d_c, result.metrics.d_s, result.metrics.gram_texture,
                      result.metrics.color);
        std::ofstream os(std::string(out_dir) + "/metrics.json", std::ios::binary);
        if (!os) throw IoError("stylize: cannot write metrics.json");
        os << buf;

        if (out_metrics) {
            out_metrics->d_c = result.metrics.d_c;
            out_metrics->d_s = result.metrics.d_s;
            out_metrics->gram_texture_diff = result.metrics.gram_texture;
            out_metrics->color_diff = result.metrics.color;
        }
        return UNIST_OK;
    } catch (const std::exception& e) {
        return status_for_exception(e, errptr);
    }
}

int unist_verify(const char* suite, char** report_out, char** errptr) {
    try {
        const std::vector<VerifyReport> reports = run_verify(suite ? suite : "all");
        if (report_out) *report_out = dup_string(format_verify_reports(reports));
        for (const auto& r : reports) {
            if (!r.all_pass()) return UNIST_ERR_VERIFY;
        }
        return UNIST_OK;
    } catch (const std::exception& e) {
        return status_for_exception(e, errptr);
    }
}

int unist_bench(const int32_t* sizes, size_t n_sizes, int32_t embed_dim, int32_t heads,
                int32_t include_reference_row, const char* csv_path, const char* json_path,
                char** report_out, char** errptr) {
    try {
        if (!sizes || n_sizes == 0) throw ConfigError("bench: empty size grid");
        std::vector<int> grid(sizes, sizes + n_sizes);
        const std::vector<SweepRow> rows = sweep(grid, embed_dim, heads);
        std::ostringstream csv;
        write_sweep_csv(rows, csv);
        if (csv_path) {
            std::ofstream os(csv_path, std::ios::binary);
            if (!os) throw IoError(std::string("bench: cannot write ") + csv_path);
            os << csv.str();
        }
        if (json_path) {
            std::ofstream os(json_path, std::ios::binary);
            if (!os) throw IoError(std::string("bench: cannot write ") + json_path);
            write_sweep_json(rows, os, include_reference_row != 0);
        }
        if (report_out) *report_out = dup_string(csv.str());
        return UNIST_OK;
    } catch (const std::exception& e) {
        return status_for_exception(e, errptr);
    }
}

int unist_traincheck(const unist_config* cfg, uint64_t seed, int32_t steps, double lr,
                     int32_t image_size, const char* curve_csv_path, const char* checkpoint_path,
                     double* initial_loss, double* final_loss, char** errptr) {
    try {
        TrainConfig tc = TrainConfig::toy_defaults();
        if (cfg) {
            const ModelConfig mc = to_model_config(*cfg);
            tc.dit = mc.dit;
            tc.codec_base_channels = mc.codec_base_channels;
        }
        if (steps > 0) tc.steps = steps;
        if (lr > 0) tc.lr = lr;
        if (image_size > 0) tc.image_size = image_size;
        tc.seed = seed;
        const OverfitReport report = overfit_check(tc, curve_csv_path ? curve_csv_path : "",
                                                   checkpoint_path ? checkpoint_path : "");
        if (initial_loss) *initial_loss = report.initial_loss;
        if (final_loss) *final_loss = report.final_loss;
        return UNIST_OK;
    } catch (const std::exception& e) {
        return status_for_exception(e, errptr);
    }
}

void unist_string_free(char* s) { std::free(s); }

const char* unist_version(void) { return "1.0.0"; }

}  // extern "C"
