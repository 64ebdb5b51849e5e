#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dit.hpp"

namespace unist {

// Analytic op-graph cost model. Builders below enumerate exactly the
// flop-reporting primitives the real forward passes execute (layout
// transforms are modeled as free views), so instrumented runs and
// count_forward agree as integers.

enum class PrimKind { Input, Matmul, Conv2d, Softmax, LayerNorm, Eltwise };

PrimKind prim_kind_from_string(const std::string& kind);

struct PrimNode {
    PrimKind kind = PrimKind::Input;
    std::string name;
    // Matmul: {batch, m, k, n}; Conv2d: {out_elems, c_in, kh, kw};
    // Softmax/LayerNorm: {elems}; Eltwise: {elems, flops_per_elem};
    // Input: {elems}.
    std::vector<int64_t> dims;
    std::vector<int> inputs;  // node indices whose outputs this consumes
};

struct CostGraph {
    std::vector<PrimNode> nodes;

    int add(PrimNode node);
    int input(const std::string& name, int64_t elems);
};

int64_t prim_flops(const PrimNode& node);
int64_t prim_out_elems(const PrimNode& node);

struct CostItem {
    std::string name;
    int64_t flops = 0;
    int64_t out_elems = 0;
};

struct CostConfig {
    int t = 1, h = 0, w = 0, d = 0, heads = 1;
};

struct CostReport {
    std::string label;
    CostConfig config;
    std::vector<CostItem> items;
    int64_t total_flops = 0;
    int64_t peak_activation_elems = 0;  // max live elems over the schedule
    int64_t largest_attention_map_elems = 0;

    // Score terms: attention score products plus weighted sums.
    int64_t score_flops() const;
    int64_t matching_flops(const std::string& suffix) const;
};

// Evaluates a described forward: per-node exact FLOPs, liveness-based peak
// activation. Node outputs stay live until their last consumer runs;
// consumerless outputs live to the end.
CostReport count_forward(const CostGraph& graph, const std::string& label,
                         const CostConfig& config);

// Graph builders mirroring the implementations.
CostGraph msa_graph(int64_t n_q, int64_t n_kv, int d, int heads);
CostGraph amsa_graph(int t_q, int t_kv, int h, int w, int d, int heads);
CostGraph encoder_block_graph(int t_q, int t_kv, int h, int w, int d, int heads);
CostGraph decoder_block_graph(int t_c, int t_s, int h, int w, int d, int heads);
CostGraph dit_forward_graph(const DitConfig& cfg, int t, int t_style, int h, int w);

// One sweep row: full MSA over the flattened H*W token set vs AMSA over the
// grid, same projections either side.
struct SweepRow {
    CostReport msa;
    CostReport amsa;
    double score_ratio = 0.0;  // msa score flops / amsa score flops
};

SweepRow bench_attention(int h, int w, int d, int heads);
std::vector<SweepRow> sweep(const std::vector<int>& sizes, int d, int heads);

// Published efficiency figures for the 32x32-token, D=512 comparison,
// carried as annotations only (their accounting convention is not
// reproduced here).
struct ReferenceFigures {
    double msa_gflops = 4.29;
    double amsa_gflops = 0.27;
    double msa_mib = 1.8e4;
    double amsa_mib = 1.1e4;
};

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& os);
void write_sweep_json(const std::vector<SweepRow>& rows, std::ostream& os, bool annotate_reference);

}  // namespace unist
