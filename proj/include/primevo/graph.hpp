// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "primevo/dna.hpp"
#include "primevo/ops.hpp"
#include "primevo/tensor.hpp"

namespace primevo {

// Where a node came from, for diagnostics and causality reports.
struct SrcLoc {
    int sub = -1;
    int instr = -1;
};

struct Node {
    Op op = Op::Input;
    std::vector<int> inputs;
    int width = 0;      // output channel width
    int param = -1;     // weight parameter id
    int param2 = -1;    // bias parameter id
    double constant = 0.0;
    int dim = 0;        // resolved output width for dense/full convs
    bool causal = false;    // matmul causal-masking overhead
    bool uncausal = false;  // test hook: deliberately future-leaking conv
    int slot = 0;           // Input: 0 = data/tokens, 1 = targets
    SrcLoc src;
};

enum class ParamInit {
    DenseWeight,    // truncated normal, std 1/sqrt(fan_in)
    Bias,           // zeros
    DConvIdentity,  // identity tap + noise
    ScaleOne,
    ShiftZero,
    Embedding,
    Positional,
};

struct ParamInfo {
    Shape shape;
    ParamInit init = ParamInit::DenseWeight;
    int fan_in = 1;
};

struct CompileConfig {
    int scale_unit = 8;
    int seq = 64;
    int d_model_rel = 8;  // block input width = d_model_rel * scale_unit
    int channel_cap = 8192;
    bool guards = true;
    bool eliminate_dead = true;
    bool causal_overhead = true;   // test hook: matmul masking off when false
    bool uncausal_conv = false;    // test hook: break conv alignment
    int force_output_width = 0;    // adapt block output to this width when > 0

    int d_model() const { return d_model_rel * scale_unit; }
};

// Topologically ordered executable node list with parameter specs.
struct Graph {
    std::vector<Node> nodes;
    int output = -1;
    int logits = -1;  // stack graphs: pre-loss logits node
    std::vector<ParamInfo> params;
    int seq = 0;
    int scale_unit = 1;
    int d_model = 0;
    Guards guards;
    Dna source;

    std::int64_t parameter_count() const;
};

struct Params {
    std::vector<Tensor> values;
};

Graph compile(const Dna& dna, const CompileConfig& cfg);

// Deterministic parameter instantiation; streams are keyed on (seed, ordinal).
Params make_params(const Graph& g, std::uint64_t seed);

// Forward over all nodes; x binds Input slot 0, targets slot 1 (stack graphs).
std::vector<Tensor> run_all(const Graph& g, const Params& p, const Tensor& x,
                            const Tensor* targets = nullptr);
Tensor run_output(const Graph& g, const Params& p, const Tensor& x,
                  const Tensor* targets = nullptr);
// Forward up to a node id (inclusive); used for logits-only inference.
Tensor run_to(const Graph& g, const Params& p, int node, const Tensor& x,
              const Tensor* targets = nullptr);

// Which operand of a mismatched binary site adapts, decided by a PRNG keyed
// to the site so the same site always resolves the same way.
struct MismatchPlan {
    bool mismatch = false;
    bool adapt_rhs = false;
    int target = 0;  // width the adapted operand is tiled/truncated to
};
MismatchPlan resolve_mismatch(int lhs_width, int rhs_width, std::uint64_t site_key);
std::uint64_t mismatch_site_key(std::uint64_t lineage, int sub, int instr);

// Structural digest of the dead-node-eliminated, bank-resolved graph;
// canonical node order by content so instruction reordering that leaves the
// graph unchanged hashes identically.
std::uint64_t graph_hash(const Graph& g);
std::uint64_t canonical_hash(const Dna& dna, const CompileConfig& cfg);
// Structure-only variant (constants zeroed); used to compare programs whose
// listings round constants to two decimals.
std::uint64_t structural_hash(const Dna& dna, const CompileConfig& cfg);

struct CausalityReport {
    bool passed = true;
    int trials = 0;
    int violating_node = -1;
    int position = -1;
    std::string message;
};
CausalityReport verify_causality(const Graph& g, const Params& p, int trials,
                                 std::uint64_t seed);

// Stack-level parameter count for a block program at the given scale unit.
struct StackConfig {
    int layers = 2;
    int vocab = 256;
    bool tie_embeddings = false;
};
std::int64_t count_stack_parameters(const Dna& dna, const CompileConfig& cfg,
                                    const StackConfig& scfg);

// Smallest scale unit whose stack-level parameter count lands in
// [min_params, max_params]; throws ResizeFailure with the bracketing counts.
int resize_to_budget(const Dna& dna, std::int64_t min_params, std::int64_t max_params,
                     const CompileConfig& cfg, const StackConfig& scfg);

// Token embedding, positional table, L independent block copies, projection.
struct DecoderStack {
    Graph graph;
    int layers = 0;
    int vocab = 0;
    int d_model = 0;
    bool tied = false;
};
DecoderStack build_stack(const Graph& block, const StackConfig& scfg);

std::string dump_graph(const Graph& g);
std::string dump_dot(const Graph& g);

}  // namespace primevo
