#include "verify.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "attention.hpp"
#include "bench.hpp"
#include "cost.hpp"
#include "dit.hpp"
#include "gradcheck.hpp"
#include "losses.hpp"
#include "ops.hpp"
#include "trainer.hpp"

namespace unist {

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("max_abs_diff: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    double m = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a.at(i) - b.at(i)));
    return m;
}

bool VerifyReport::all_pass() const {
    for (const auto& c : checks) {
        if (!c.pass) return false;
    }
    return true;
}

double VerifyReport::worst_value() const {
    double worst = 0.0;
    for (const auto& c : checks) {
        if (!c.require_above) worst = std::max(worst, c.value);
    }
    return worst;
}

namespace {

VerifyCheck below(const std::string& name, double value, double threshold) {
    return {name, value, threshold, false, value < threshold};
}

VerifyCheck above(const std::string& name, double value, double threshold) {
    return {name, value, threshold, true, value > threshold};
}

VerifyCheck exact(const std::string& name, int64_t got, int64_t want) {
    return {name, static_cast<double>(got - want), 0.0, false, got == want};
}

Tensor random_grid(const std::vector<int>& shape, Rng& rng, bool requires_grad = false) {
    return Tensor::random_uniform(shape, -1.0, 1.0, rng, requires_grad);
}

VerifyReport verify_amsa() {
    VerifyReport report{"amsa", {}};
    Rng rng(2024);
    const int t = 2, h = 3, w = 4, d = 8, heads = 2;
    const AmsaParams params = AmsaParams::init(d, heads, rng);
    const Tensor q = random_grid({t, h, w, d}, rng);
    const Tensor k = random_grid({t, h, w, d}, rng);
    const Tensor v = random_grid({t, h, w, d}, rng);

    // stage 1 against a per-column msa run
    const Tensor f = amsa_stage1(q, k, v, params);
    double stage1_diff = 0.0;
    for (int tt = 0; tt < t; ++tt) {
        for (int ww = 0; ww < w; ++ww) {
            std::vector<double> colq(static_cast<size_t>(h) * d), colk(colq.size()),
                colv(colq.size());
            for (int hh = 0; hh < h; ++hh) {
                for (int dd = 0; dd < d; ++dd) {
                    const int64_t idx = ((static_cast<int64_t>(tt) * h + hh) * w + ww) * d + dd;
                    colq[static_cast<size_t>(hh) * d + dd] = q.at(idx);
                    colk[static_cast<size_t>(hh) * d + dd] = k.at(idx);
                    colv[static_cast<size_t>(hh) * d + dd] = v.at(idx);
                }
            }
            const Tensor out = layer_norm(
                msa(Tensor::from_data({h, d}, colq), Tensor::from_data({h, d}, colk),
                    Tensor::from_data({h, d}, colv), params.stage1),
                params.ln1_gamma, params.ln1_beta);
            for (int hh = 0; hh < h; ++hh) {
                for (int dd = 0; dd < d; ++dd) {
                    const int64_t idx = ((static_cast<int64_t>(tt) * h + hh) * w + ww) * d + dd;
                    stage1_diff = std::max(
                        stage1_diff, std::fabs(f.at(idx) - out.at(static_cast<int64_t>(hh) * d + dd)));
                }
            }
        }
    }
    report.checks.push_back(below("stage1_per_column_oracle", stage1_diff, 1e-10));

    for (const auto& [variant, name] :
         {std::pair{AmsaVariant::Standard, "standard_vs_oracle"},
          std::pair{AmsaVariant::VariantA, "variant_a_vs_oracle"},
          std::pair{AmsaVariant::VariantB, "variant_b_vs_oracle"}}) {
        const Tensor got = amsa(q, k, v, params, variant);
        const Tensor want = axial_oracle(q, k, v, params, variant);
        report.checks.push_back(below(name, max_abs_diff(got, want), 1e-10));
    }

    const Tensor std_out = amsa(q, k, v, params, AmsaVariant::Standard);
    const Tensor b_out = amsa(q, k, v, params, AmsaVariant::VariantB);
    report.checks.push_back(above("standard_vs_variant_b_differ", max_abs_diff(std_out, b_out), 1e-8));
    return report;
}

VerifyReport verify_grads() {
    VerifyReport report{"grads", {}};
    Rng rng(7);
    const int d = 8, heads = 2;

    {
        const AttnParams p = AttnParams::init(d, heads, rng);
        Tensor q = random_grid({3, d}, rng, true);
        const Tensor k = random_grid({3, d}, rng);
        const Tensor v = random_grid({3, d}, rng);
        std::vector<Tensor> params = p.tensors();
        params.push_back(q);
        const double err =
            grad_check([&] { return sum_all(msa(q, k, v, p)); }, params);
        report.checks.push_back(below("msa_grad", err, 1e-4));
    }
    {
        const AmsaParams p = AmsaParams::init(d, heads, rng);
        Tensor q = random_grid({1, 3, 3, d}, rng, true);
        const Tensor k = random_grid({1, 3, 3, d}, rng);
        const Tensor v = random_grid({1, 3, 3, d}, rng);
        std::vector<Tensor> params = p.tensors();
        params.push_back(q);
        const double err = grad_check(
            [&] { return sum_all(amsa(q, k, v, p, AmsaVariant::Standard)); }, params);
        report.checks.push_back(below("amsa_grad", err, 1e-4));
    }
    {
        Rng block_rng(11);
        const EncoderBlockParams p = EncoderBlockParams::init(d, heads, block_rng);
        TokenGrid x{random_grid({1, 3, 3, d}, block_rng, true), GridKind::Content};
        std::vector<Tensor> params;
        std::vector<std::pair<std::string, Tensor>> named;
        p.collect("enc", named);
        for (auto& [n, tensor] : named) params.push_back(tensor);
        params.push_back(x.data);
        const double err = grad_check(
            [&] { return sum_all(encoder_block(x, x, p, AmsaVariant::Standard).data); }, params);
        report.checks.push_back(below("encoder_block_grad", err, 1e-4));
    }
    {
        Rng loss_rng(13);
        Tensor a = random_grid({1, 2, 4, 4}, loss_rng, true);
        const Tensor b = random_grid({1, 2, 4, 4}, loss_rng);
        const double err = grad_check(
            [&] {
                auto [mu_a, sig_a] = instance_stats(a);
                auto [mu_b, sig_b] = instance_stats(b);
                return add(l2_norm(sub(mu_a, mu_b)), l2_norm(sub(sig_a, sig_b)));
            },
            {a});
        report.checks.push_back(below("style_stats_grad", err, 1e-4));
    }
    return report;
}

VerifyReport verify_flops() {
    VerifyReport report{"flops", {}};
    Rng rng(5);
    const int d = 16, heads = 4;

    {
        const int n = 6, m = 5;
        const AttnParams p = AttnParams::init(d, heads, rng);
        CostMeter meter;
        set_active_meter(&meter);
        msa(random_grid({n, d}, rng), random_grid({m, d}, rng), random_grid({m, d}, rng), p);
        set_active_meter(nullptr);
        const AttnFlops closed = attention_flops(n, m, d, heads);
        report.checks.push_back(exact("msa_scores_counter_vs_closed_form",
                                      meter.total_matching("scores/matmul") +
                                          meter.total_matching("attnsum/matmul"),
                                      closed.score_total()));
        report.checks.push_back(exact("msa_proj_counter_vs_closed_form",
                                      meter.total_matching("proj/matmul"), closed.projections));
        const CostReport analytic = count_forward(msa_graph(n, m, d, heads), "msa", {});
        report.checks.push_back(
            exact("msa_counter_vs_graph_total", meter.total(), analytic.total_flops));
    }
    {
        const int t = 2, h = 4, w = 3;
        const AmsaParams p = AmsaParams::init(d, heads, rng);
        CostMeter meter;
        set_active_meter(&meter);
        amsa(random_grid({t, h, w, d}, rng), random_grid({t, h, w, d}, rng),
             random_grid({t, h, w, d}, rng), p, AmsaVariant::Standard);
        set_active_meter(nullptr);
        const CostReport analytic = count_forward(amsa_graph(t, t, h, w, d, heads), "amsa", {});
        report.checks.push_back(
            exact("amsa_counter_vs_graph_total", meter.total(), analytic.total_flops));
        const int64_t stage_scores = 4LL * d * (static_cast<int64_t>(t) * w * h * h +
                                                static_cast<int64_t>(t) * h * w * w);
        report.checks.push_back(exact("amsa_scores_counter_vs_closed_form",
                                      meter.total_matching("scores/matmul") +
                                          meter.total_matching("attnsum/matmul"),
                                      stage_scores));
    }
    {
        const SweepRow row = bench_attention(32, 32, 512, 8);
        report.checks.push_back(
            exact("msa_amsa_score_ratio_x16",
                  row.msa.score_flops(), 16 * row.amsa.score_flops()));
    }
    return report;
}

VerifyReport verify_losses() {
    VerifyReport report{"losses", {}};
    Rng rng(3);
    auto make_taps = [&rng](int b, int c, int s) {
        return FeatureTaps{random_grid({b, c, s, s}, rng), random_grid({b, 2 * c, s / 2, s / 2}, rng),
                           random_grid({b, 4 * c, s / 4, s / 4}, rng),
                           random_grid({b, 8 * c, s / 8, s / 8}, rng)};
    };
    const FeatureTaps taps = make_taps(1, 2, 8);
    report.checks.push_back(
        below("content_loss_identical_zero",
              std::fabs(content_loss(taps, taps).scalar_value()), 1e-300));
    report.checks.push_back(
        below("style_loss_identical_zero", std::fabs(style_loss(taps, taps).scalar_value()),
              1e-300));
    report.checks.push_back(below(
        "temporal_loss_identical_zero",
        std::fabs(temporal_loss(taps, taps, taps, taps).scalar_value()), 1e-300));

    LossWeights w;
    const Tensor one = Tensor::scalar(1.0);
    report.checks.push_back(below(
        "total_loss_unit_parts",
        std::fabs(total_loss(one, one, one, one, w).scalar_value() - 92.6), 1e-12));

    // per-vector positive rescaling leaves the cosine structure unchanged
    const FeatureTaps c2 = make_taps(1, 2, 8);
    FeatureTaps scaled1 = taps, scaled2 = c2;
    scaled1.phi3 = mul_scalar(taps.phi3, 2.5);
    scaled1.phi4 = mul_scalar(taps.phi4, 0.4);
    scaled2.phi3 = mul_scalar(c2.phi3, 3.0);
    scaled2.phi4 = mul_scalar(c2.phi4, 1.7);
    report.checks.push_back(below(
        "temporal_loss_scale_invariant",
        std::fabs(temporal_loss(taps, c2, scaled1, scaled2).scalar_value()), 1e-12));
    return report;
}

VerifyReport verify_determinism() {
    VerifyReport report{"determinism", {}};
    auto run_once = [](uint64_t seed) {
        Rng rng(seed);
        DitConfig cfg;
        cfg.embed_dim = 8;
        cfg.heads = 2;
        cfg.n_c = 1;
        cfg.n_s = 1;
        cfg.n_t = 1;
        const DitParams params = DitParams::init(cfg, rng);
        TokenGrid content{random_grid({2, 3, 3, 8}, rng), GridKind::Content};
        TokenGrid style{random_grid({1, 3, 3, 8}, rng), GridKind::Style};
        return dit_forward(content, style, cfg, params).data;
    };
    const Tensor a = run_once(99);
    const Tensor b = run_once(99);
    const bool identical =
        std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(double)) == 0;
    report.checks.push_back(
        VerifyCheck{"dit_forward_bitwise_repeat", identical ? 0.0 : 1.0, 0.5, false, identical});

    TrainConfig tcfg = TrainConfig::toy_defaults();
    const TrainBatch b1 = make_toy_batch(tcfg);
    const TrainBatch b2 = make_toy_batch(tcfg);
    const bool batch_identical = std::memcmp(b1.content.data().data(), b2.content.data().data(),
                                             b1.content.data().size() * sizeof(double)) == 0;
    report.checks.push_back(VerifyCheck{"toy_batch_bitwise_repeat",
                                        batch_identical ? 0.0 : 1.0, 0.5, false, batch_identical});
    return report;
}

}  // namespace

std::vector<std::string> verify_suite_names() {
    return {"amsa", "grads", "flops", "losses", "determinism"};
}

std::vector<VerifyReport> run_verify(const std::string& selector) {
    std::vector<VerifyReport> reports;
    const auto want = [&selector](const char* name) {
        return selector == "all" || selector == name;
    };
    bool matched = false;
    if (want("amsa")) {
        reports.push_back(verify_amsa());
        matched = true;
    }
    if (want("grads")) {
        reports.push_back(verify_grads());
        matched = true;
    }
    if (want("flops")) {
        reports.push_back(verify_flops());
        matched = true;
    }
    if (want("losses")) {
        reports.push_back(verify_losses());
        matched = true;
    }
    if (want("determinism")) {
        reports.push_back(verify_determinism());
        matched = true;
    }
    if (!matched) throw ConfigError("verify: unknown suite '" + selector + "'");
    return reports;
}

std::string format_verify_reports(const std::vector<VerifyReport>& reports) {
    std::ostringstream os;
    char buf[160];
    for (const auto& report : reports) {
        os << "suite " << report.suite << (report.all_pass() ? "  [pass]" : "  [FAIL]") << "\n";
        for (const auto& c : report.checks) {
            std::snprintf(buf, sizeof(buf), "  %-40s %11.3e %s %.3e  %s\n", c.name.c_str(),
                          c.value, c.require_above ? ">" : "<", c.threshold,
                          c.pass ? "ok" : "FAIL");
            os << buf;
        }
    }
    return os.str();
}

}  // namespace unist
