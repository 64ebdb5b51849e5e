#include "bench.hpp"

#include <algorithm>
#include <ostream>

#include "cost.hpp"

namespace unist {

PrimKind prim_kind_from_string(const std::string& kind) {
    if (kind == "input") return PrimKind::Input;
    if (kind == "matmul") return PrimKind::Matmul;
    if (kind == "conv2d") return PrimKind::Conv2d;
    if (kind == "softmax") return PrimKind::Softmax;
    if (kind == "layer_norm") return PrimKind::LayerNorm;
    if (kind == "eltwise") return PrimKind::Eltwise;
    throw ConfigError("accounting: unknown primitive '" + kind + "'");
}

int CostGraph::add(PrimNode node) {
    for (int i : node.inputs) {
        if (i < 0 || i >= static_cast<int>(nodes.size())) {
            throw ConfigError("accounting: node input index out of range");
        }
    }
    nodes.push_back(std::move(node));
    return static_cast<int>(nodes.size()) - 1;
}

int CostGraph::input(const std::string& name, int64_t elems) {
    return add({PrimKind::Input, name, {elems}, {}});
}

int64_t prim_flops(const PrimNode& node) {
    switch (node.kind) {
        case PrimKind::Input:
            return 0;
        case PrimKind::Matmul:
            return flops_matmul(node.dims[0], node.dims[1], node.dims[2], node.dims[3]);
        case PrimKind::Conv2d:
            return flops_conv2d(node.dims[0], node.dims[1], node.dims[2], node.dims[3], true);
        case PrimKind::Softmax:
            return flops_softmax(node.dims[0]);
        case PrimKind::LayerNorm:
            return flops_layer_norm(node.dims[0]);
        case PrimKind::Eltwise:
            return flops_eltwise(node.dims[0], node.dims.size() > 1 ? node.dims[1] : 1);
    }
    throw ConfigError("accounting: unknown primitive kind");
}

int64_t prim_out_elems(const PrimNode& node) {
    switch (node.kind) {
        case PrimKind::Input:
            return node.dims[0];
        case PrimKind::Matmul:
            return node.dims[0] * node.dims[1] * node.dims[3];
        case PrimKind::Conv2d:
            return node.dims[0];
        case PrimKind::Softmax:
        case PrimKind::LayerNorm:
        case PrimKind::Eltwise:
            return node.dims[0];
    }
    throw ConfigError("accounting: unknown primitive kind");
}

int64_t CostReport::score_flops() const {
    return matching_flops("scores/matmul") + matching_flops("attnsum/matmul");
}

int64_t CostReport::matching_flops(const std::string& suffix) const {
    int64_t total = 0;
    for (const auto& item : items) {
        if (item.name.size() >= suffix.size() &&
            item.name.compare(item.name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            total += item.flops;
        }
    }
    return total;
}

CostReport count_forward(const CostGraph& graph, const std::string& label,
                         const CostConfig& config) {
    CostReport report;
    report.label = label;
    report.config = config;
    const int n = static_cast<int>(graph.nodes.size());
    std::vector<int> last_use(static_cast<size_t>(n), n - 1);  // outputs live to the end
    for (int i = 0; i < n; ++i) {
        for (int j : graph.nodes[static_cast<size_t>(i)].inputs) {
            last_use[static_cast<size_t>(j)] = std::max(last_use[static_cast<size_t>(j)], i);
        }
    }
    std::vector<int64_t> elems(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const PrimNode& node = graph.nodes[static_cast<size_t>(i)];
        const int64_t f = prim_flops(node);
        elems[static_cast<size_t>(i)] = prim_out_elems(node);
        report.items.push_back({node.name, f, elems[static_cast<size_t>(i)]});
        report.total_flops += f;
        if (node.name.size() >= 13 &&
            node.name.compare(node.name.size() - 13, 13, "scores/matmul") == 0) {
            report.largest_attention_map_elems =
                std::max(report.largest_attention_map_elems, elems[static_cast<size_t>(i)]);
        }
    }
    for (int i = 0; i < n; ++i) {
        int64_t live = 0;
        for (int j = 0; j <= i; ++j) {
            if (last_use[static_cast<size_t>(j)] >= i) live += elems[static_cast<size_t>(j)];
        }
        report.peak_activation_elems = std::max(report.peak_activation_elems, live);
    }
    return report;
}

namespace {

struct MsaNodes {
    int out = -1;
};

// Mirrors msa(): three projections, scores, scale, softmax, weighted sum,
// output projection.
int append_msa(CostGraph& g, const std::string& p, int64_t b, int64_t n, int64_t m, int64_t d,
               int64_t heads, int q_in, int k_in, int v_in) {
    const int qp = g.add({PrimKind::Matmul, p + "/proj/matmul", {b, n, d, d}, {q_in}});
    const int kp = g.add({PrimKind::Matmul, p + "/proj/matmul", {b, m, d, d}, {k_in}});
    const int vp = g.add({PrimKind::Matmul, p + "/proj/matmul", {b, m, d, d}, {v_in}});
    const int64_t dh = d / heads;
    const int sc =
        g.add({PrimKind::Matmul, p + "/scores/matmul", {b * heads, n, dh, m}, {qp, kp}});
    const int scl = g.add({PrimKind::Eltwise, p + "/eltwise", {b * heads * n * m, 1}, {sc}});
    const int sm = g.add({PrimKind::Softmax, p + "/softmax", {b * heads * n * m}, {scl}});
    const int ws =
        g.add({PrimKind::Matmul, p + "/attnsum/matmul", {b * heads, n, m, dh}, {sm, vp}});
    return g.add({PrimKind::Matmul, p + "/proj/matmul", {b, n, d, d}, {ws}});
}

// Mirrors amsa(): stage-1 msa over (t, w) columns + LN, stage-2 msa over
// (t, h) rows + LN. The k/v grids are broadcast to t_q frames before the
// stage-1 projections, which is why both stages run at full batch.
int append_amsa(CostGraph& g, const std::string& p, int t_q, int h, int w, int d, int heads,
                int q_in, int k_in, int v_in) {
    const int64_t grid = static_cast<int64_t>(t_q) * h * w * d;
    const int s1 = append_msa(g, p + "/amsa/stage1/msa", static_cast<int64_t>(t_q) * w, h, h, d,
                              heads, q_in, k_in, v_in);
    const int f = g.add({PrimKind::LayerNorm, p + "/amsa/stage1/layer_norm", {grid}, {s1}});
    // stage 2 reads the original k (and v for the B variant); edges keep
    // those inputs live
    const int s2 = append_msa(g, p + "/amsa/stage2/msa", static_cast<int64_t>(t_q) * h, w, w, d,
                              heads, f, k_in, v_in);
    return g.add({PrimKind::LayerNorm, p + "/amsa/stage2/layer_norm", {grid}, {s2}});
}

int append_conv_proj(CostGraph& g, const std::string& p, int t, int h, int w, int d, int x_in) {
    const int64_t out_elems = static_cast<int64_t>(t) * h * w * d;
    return g.add({PrimKind::Conv2d, p + "/conv2d", {out_elems, d, 1, 1}, {x_in}});
}

int append_ffn(CostGraph& g, const std::string& p, int64_t positions, int64_t d, int x_in) {
    const int64_t hidden = 4 * d;
    const int m1 = g.add({PrimKind::Matmul, p + "/ffn/matmul", {1, positions, d, hidden}, {x_in}});
    const int b1 = g.add({PrimKind::Eltwise, p + "/ffn/eltwise", {positions * hidden, 1}, {m1}});
    const int ge = g.add({PrimKind::Eltwise, p + "/ffn/eltwise", {positions * hidden, 8}, {b1}});
    const int m2 = g.add({PrimKind::Matmul, p + "/ffn/matmul", {1, positions, hidden, d}, {ge}});
    return g.add({PrimKind::Eltwise, p + "/ffn/eltwise", {positions * d, 1}, {m2}});
}

// Mirrors encoder_block(): conv projections, amsa, residual + LN, ffn,
// residual + LN.
int append_encoder_block(CostGraph& g, const std::string& p, int t_q, int t_kv, int h, int w,
                         int d, int heads, int q_in, int kv_in) {
    const int64_t grid = static_cast<int64_t>(t_q) * h * w * d;
    const int cq = append_conv_proj(g, p, t_q, h, w, d, q_in);
    const int ck = append_conv_proj(g, p, t_kv, h, w, d, kv_in);
    const int cv = append_conv_proj(g, p, t_kv, h, w, d, kv_in);
    const int att = append_amsa(g, p, t_q, h, w, d, heads, cq, ck, cv);
    const int r1 = g.add({PrimKind::Eltwise, p + "/eltwise", {grid, 1}, {att, q_in}});
    const int n1 = g.add({PrimKind::LayerNorm, p + "/layer_norm", {grid}, {r1}});
    const int ff = append_ffn(g, p, static_cast<int64_t>(t_q) * h * w, d, n1);
    const int r2 = g.add({PrimKind::Eltwise, p + "/eltwise", {grid, 1}, {ff, n1}});
    return g.add({PrimKind::LayerNorm, p + "/layer_norm", {grid}, {r2}});
}

int append_decoder_block(CostGraph& g, const std::string& p, int t_c, int t_s, int h, int w,
                         int d, int heads, int c_in, int s_in) {
    const int64_t grid = static_cast<int64_t>(t_c) * h * w * d;
    const int cq1 = append_conv_proj(g, p, t_c, h, w, d, c_in);
    const int ck1 = append_conv_proj(g, p, t_s, h, w, d, s_in);
    const int cv1 = append_conv_proj(g, p, t_s, h, w, d, s_in);
    const int a1 = append_amsa(g, p, t_c, h, w, d, heads, cq1, ck1, cv1);
    const int r1 = g.add({PrimKind::Eltwise, p + "/eltwise", {grid, 1}, {a1, c_in}});
    const int n1 = g.add({PrimKind::LayerNorm, p + "/layer_norm", {grid}, {r1}});
    const int cq2 = append_conv_proj(g, p, t_c, h, w, d, n1);
    const int ck2 = append_conv_proj(g, p, t_s, h, w, d, s_in);
    const int cv2 = append_conv_proj(g, p, t_s, h, w, d, s_in);
    const int a2 = append_amsa(g, p, t_c, h, w, d, heads, cq2, ck2, cv2);
    const int r2 = g.add({PrimKind::Eltwise, p + "/eltwise", {grid, 1}, {a2, n1}});
    const int n2 = g.add({PrimKind::LayerNorm, p + "/layer_norm", {grid}, {r2}});
    const int ff = append_ffn(g, p, static_cast<int64_t>(t_c) * h * w, d, n2);
    const int r3 = g.add({PrimKind::Eltwise, p + "/eltwise", {grid, 1}, {ff, n2}});
    return g.add({PrimKind::LayerNorm, p + "/layer_norm", {grid}, {r3}});
}

}  // namespace

CostGraph msa_graph(int64_t n_q, int64_t n_kv, int d, int heads) {
    CostGraph g;
    const int q = g.input("q", n_q * d);
    const int k = g.input("k", n_kv * d);
    const int v = g.input("v", n_kv * d);
    append_msa(g, "msa", 1, n_q, n_kv, d, heads, q, k, v);
    return g;
}

CostGraph amsa_graph(int t_q, int t_kv, int h, int w, int d, int heads) {
    CostGraph g;
    const int64_t grid = static_cast<int64_t>(t_q) * h * w * d;
    const int q = g.input("q", grid);
    // k/v broadcast to t_q frames before the stage-1 projections, so the
    // flop count does not depend on t_kv
    (void)t_kv;
    const int k = g.input("k", grid);
    const int v = g.input("v", grid);
    append_amsa(g, "", t_q, h, w, d, heads, q, k, v);
    return g;
}

CostGraph encoder_block_graph(int t_q, int t_kv, int h, int w, int d, int heads) {
    CostGraph g;
    const int q = g.input("x_q", static_cast<int64_t>(t_q) * h * w * d);
    const int kv = g.input("x_kv", static_cast<int64_t>(t_kv) * h * w * d);
    append_encoder_block(g, "encoder_block", t_q, t_kv, h, w, d, heads, q, kv);
    return g;
}

CostGraph decoder_block_graph(int t_c, int t_s, int h, int w, int d, int heads) {
    CostGraph g;
    const int c = g.input("content", static_cast<int64_t>(t_c) * h * w * d);
    const int s = g.input("style", static_cast<int64_t>(t_s) * h * w * d);
    append_decoder_block(g, "decoder_block", t_c, t_s, h, w, d, heads, c, s);
    return g;
}

CostGraph dit_forward_graph(const DitConfig& cfg, int t, int t_style, int h, int w) {
    cfg.validate();
    CostGraph g;
    const int d = cfg.embed_dim;
    int c = g.input("content", static_cast<int64_t>(t) * h * w * d);
    int s = g.input("style", static_cast<int64_t>(t_style) * h * w * d);
    for (int i = 0; i < cfg.n_c; ++i) {
        c = append_encoder_block(g, "dit/enc_c" + std::to_string(i), t, t, h, w, d, cfg.heads, c,
                                 c);
    }
    for (int i = 0; i < cfg.n_s; ++i) {
        s = append_encoder_block(g, "dit/enc_s" + std::to_string(i), t_style, t_style, h, w, d,
                                 cfg.heads, s, s);
    }
    if (cfg.interaction_enabled) {
        if (cfg.unimodal) {
            c = append_encoder_block(g, "dit/inter_v", t, t, h, w, d, cfg.heads, c, c);
        } else {
            if (t % 2 != 0) throw ConfigError("dit graph: bimodal interaction needs even T");
            const int half = t / 2;
            const int v = append_encoder_block(g, "dit/inter_v", half, half, h, w, d, cfg.heads,
                                               c, c);
            const int i = append_encoder_block(g, "dit/inter_i", half, half, h, w, d, cfg.heads,
                                               c, c);
            // zero-flop copy, but a real allocation
            c = g.add({PrimKind::Eltwise, "dit/concat",
                       {static_cast<int64_t>(t) * h * w * d, 0}, {v, i}});
        }
    }
    for (int i = 0; i < cfg.n_t; ++i) {
        c = append_decoder_block(g, "dit/dec" + std::to_string(i), t, t_style, h, w, d, cfg.heads,
                                 c, s);
    }
    return g;
}

SweepRow bench_attention(int h, int w, int d, int heads) {
    SweepRow row;
    const int64_t tokens = static_cast<int64_t>(h) * w;
    row.msa = count_forward(msa_graph(tokens, tokens, d, heads), "msa", {1, h, w, d, heads});
    row.amsa = count_forward(amsa_graph(1, 1, h, w, d, heads), "amsa", {1, h, w, d, heads});
    row.score_ratio = static_cast<double>(row.msa.score_flops()) /
                      static_cast<double>(row.amsa.score_flops());
    return row;
}

std::vector<SweepRow> sweep(const std::vector<int>& sizes, int d, int heads) {
    if (sizes.empty()) throw ConfigError("sweep: empty size grid");
    std::vector<SweepRow> rows;
    for (int s : sizes) rows.push_back(bench_attention(s, s, d, heads));
    return rows;
}

namespace {

double elems_to_mib_f32(int64_t elems) {
    return static_cast<double>(elems) * 4.0 / (1024.0 * 1024.0);
}

}  // namespace

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& os) {
    os << "h,w,d,heads,msa_score_flops,amsa_score_flops,score_ratio,"
          "msa_total_flops,amsa_total_flops,msa_peak_elems,amsa_peak_elems,"
          "msa_peak_mib_f32,amsa_peak_mib_f32,msa_largest_attn_map,amsa_largest_attn_map\n";
    for (const auto& row : rows) {
        const auto& cfg = row.msa.config;
        os << cfg.h << "," << cfg.w << "," << cfg.d << "," << cfg.heads << ","
           << row.msa.score_flops() << "," << row.amsa.score_flops() << "," << row.score_ratio
           << "," << row.msa.total_flops << "," << row.amsa.total_flops << ","
           << row.msa.peak_activation_elems << "," << row.amsa.peak_activation_elems << ","
           << elems_to_mib_f32(row.msa.peak_activation_elems) << ","
           << elems_to_mib_f32(row.amsa.peak_activation_elems) << ","
           << row.msa.largest_attention_map_elems << "," << row.amsa.largest_attention_map_elems
           << "\n";
    }
}

void write_sweep_json(const std::vector<SweepRow>& rows, std::ostream& os,
                      bool annotate_reference) {
    os << "{\n  \"schema\": 1,\n"
       << "  \"conventions\": \"1 multiply-add = 2 FLOPs; softmax 5 FLOPs/elem; "
          "layer_norm 8 FLOPs/elem; memory in activation element counts, "
          "float32 MiB column for convenience\",\n";
    if (annotate_reference) {
        const ReferenceFigures ref;
        os << "  \"reference_32x32_d512\": {\"msa_gflops\": " << ref.msa_gflops
           << ", \"amsa_gflops\": " << ref.amsa_gflops << ", \"msa_mib\": " << ref.msa_mib
           << ", \"amsa_mib\": " << ref.amsa_mib << "},\n";
    }
    os << "  \"rows\": [\n";
    for (size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        const auto& cfg = row.msa.config;
        os << "    {\"h\": " << cfg.h << ", \"w\": " << cfg.w << ", \"d\": " << cfg.d
           << ", \"heads\": " << cfg.heads << ", \"msa_score_flops\": " << row.msa.score_flops()
           << ", \"amsa_score_flops\": " << row.amsa.score_flops()
           << ", \"score_ratio\": " << row.score_ratio
           << ", \"msa_total_flops\": " << row.msa.total_flops
           << ", \"amsa_total_flops\": " << row.amsa.total_flops
           << ", \"msa_peak_elems\": " << row.msa.peak_activation_elems
           << ", \"amsa_peak_elems\": " << row.amsa.peak_activation_elems << "}"
           << (i + 1 < rows.size() ? ",\n" : "\n");
    }
    os << "  ]\n}\n";
}

}  // namespace unist
