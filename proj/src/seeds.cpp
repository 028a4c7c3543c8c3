// SPDX-License-Identifier: Apache-2.0

#include "primevo/seeds.hpp"

#include <algorithm>
#include <cmath>

namespace primevo {

namespace {

Instruction prim(Op op, int in1, int in2, int cidx = 0, int didx = 0, int br = 1) {
    Instruction i;
    i.op = op;
    i.input1 = in1;
    i.input2 = in2;
    i.constant_idx = cidx;
    i.dim_idx = didx;
    i.branching = br;
    return i;
}

Instruction call(int callee, int in1, int in2, int cidx = 0, int didx = 0, int br = 1) {
    Instruction i;
    i.callee = callee;
    i.input1 = in1;
    i.input2 = in2;
    i.constant_idx = cidx;
    i.dim_idx = didx;
    i.branching = br;
    return i;
}

Subprogram sub(std::string label, std::vector<Instruction> instructions) {
    Subprogram s;
    s.label = std::move(label);
    s.instructions = std::move(instructions);
    return s;
}

// Bank slots shared by the transformer-family seeds. At scale unit 64 these
// resolve to 128 (filler), 512 (d_model), 64 (head), 2048 (d_ff).
constexpr int kD0 = 0, kDModel = 1, kHead = 2, kDff = 3, kDAux = 4;
constexpr int kC0 = 0, kC1 = 1;

Dna build_transformer() {
    Dna dna;
    dna.constants = {0.0, 0.125};
    dna.dims = {2, 8, 1, 32, 2, 2};
    dna.subprograms = {
        sub("main",
            {
                call(5, 0, 0),           // pre-attention norm
                call(1, 2, 2, kC0, kD0, 8),  // multi-head self-attention
                prim(Op::Conv1x1, 3, 3, kC0, kDModel),  // output projection
                call(8, 0, 4),           // residual
                call(5, 5, 5),           // pre-ff norm
                call(2, 6, 6),           // feed forward
                call(8, 5, 7),           // residual
            }),
        sub("attention",
            {
                call(3, 0, 0, kC0, kHead),          // k head
                call(3, 0, 0, kC0, kHead),          // q head
                prim(Op::CMul, 3, 3, kC1, kD0),     // scaled q
                call(3, 0, 0, kC0, kHead),          // v head
                prim(Op::TMatMul, 4, 2, kC0, kD0),  // logits
                call(4, 6, 6),                      // softmax
                prim(Op::MatMul, 7, 5, kC0, kD0),   // weighted values
            }),
        sub("ff",
            {
                prim(Op::Conv1x1, 0, 0, kC0, kDff),
                prim(Op::Shift, 2, 2, kC0, kD0),
                call(9, 3, 3),
                prim(Op::Conv1x1, 4, 4, kC0, kDModel),
                prim(Op::Shift, 5, 5, kC0, kD0),
            }),
        sub("projection", {prim(Op::Conv1x1, 0, 0, kC0, kHead)}),
        sub("softmax",
            {
                prim(Op::Exp, 0, 0),
                prim(Op::Mask, 2, 2),
                prim(Op::RedSum, 3, 3),
                prim(Op::Divide, 3, 4),
            }),
        sub("norm", {call(6, 0, 0), call(7, 2, 2)}),
        sub("zscore",
            {
                prim(Op::RedMean, 0, 0),
                prim(Op::Difference, 0, 2),
                prim(Op::Multiply, 3, 3),
                prim(Op::RedMean, 4, 4),
                prim(Op::AbsRoot, 5, 5),
                prim(Op::Divide, 3, 6),
            }),
        sub("scaleshift", {prim(Op::Scale, 0, 0), prim(Op::Shift, 2, 2)}),
        sub("residual", {prim(Op::Add, 0, 1)}),
        sub("activation", {prim(Op::Max, 0, 0, kC0, kD0)}),
    };
    dna.meta.lineage = 1;
    return dna;
}

// Primer bank slots resolve at scale unit 48 to 768 (filler), 384 (d_model),
// 48 (head), 2304 (half of d_ff).
Dna build_primer() {
    Dna dna;
    dna.constants = {-1.12, -0.57};
    dna.dims = {16, 8, 1, 48, 16, 16};
    dna.subprograms = {
        sub("main",
            {
                call(5, 0, 0),               // custom norm
                call(1, 2, 2, kC0, kD0, 8),  // attention with MDHA and shared QK
                prim(Op::Conv1x1, 3, 3, kC0, kDModel),
                call(8, 0, 4),  // doubled residual
                call(2, 5, 5),  // feed forward (norm moved after it)
                call(5, 6, 6),
                call(8, 5, 7),
            }),
        sub("attention",
            {
                prim(Op::Max, 0, 0, kC1, kD0),      // dead
                call(3, 0, 0, kC0, kHead),          // k head (MDHA)
                prim(Op::Max, 1, 1, kC1, kD0),      // dead
                call(3, 0, 0, kC0, kHead),          // shared-QK base
                prim(Op::Conv1x1, 5, 1, kC0, kHead),  // q = k . W
                prim(Op::Max, 0, 0, kC1, kD0),      // dead
                call(3, 0, 0, kC0, kHead),          // v head (MDHA)
                prim(Op::TMatMul, 6, 5, kC0, kD0),
                call(4, 9, 9),                      // softmax
                prim(Op::Tanh, 10, 9, kC0, kDModel),   // spatial gating
                prim(Op::Scale, 11, 5, kC0, kDModel),
                prim(Op::MatMul, 12, 8, kC0, kD0),
            }),
        sub("ff",
            {
                call(10, 0, 0, kC0, kDff, 2),  // 12x upward projection
                prim(Op::Shift, 2, 2, kC0, kD0),
                call(9, 3, 3),                 // squared relu
                prim(Op::Conv1x1, 4, 4, kC0, kDModel),
            }),
        sub("projection",
            {
                prim(Op::Conv1x1, 0, 0, kC0, kHead),
                prim(Op::DConv3x1, 2, 0, kC0, kDModel),
                prim(Op::CMul, 3, 3, kC0, kDModel),
            }),
        sub("softmax",
            {
                prim(Op::Exp, 0, 0),
                prim(Op::Mask, 2, 2),
                prim(Op::RedSum, 3, 3),
                prim(Op::Divide, 3, 4),
            }),
        sub("norm", {call(6, 0, 0), call(7, 2, 2)}),
        sub("zscore",
            {
                prim(Op::RedMean, 0, 0),
                prim(Op::Difference, 0, 2),
                prim(Op::Multiply, 3, 0),  // x * (x - mu)
                prim(Op::RedMean, 4, 4),
                prim(Op::AbsRoot, 5, 5),
                prim(Op::Divide, 3, 6),
            }),
        sub("scaleshift", {prim(Op::Scale, 0, 0), prim(Op::Shift, 2, 2, kC1, kDModel)}),
        sub("residual", {prim(Op::Add, 0, 1), prim(Op::Add, 2, 1)}),
        sub("activation", {prim(Op::Max, 0, 0, kC1, kD0), prim(Op::Square, 2, 0)}),
        sub("ffup", {prim(Op::Conv1x1, 0, 1, kC0, kDff)}),
    };
    dna.meta.lineage = 2;
    return dna;
}

struct SubRole {
    int index = -1;
    Subprogram* sub = nullptr;
};

int find_sub(const Dna& dna, const std::string& label) {
    for (int i = 0; i < static_cast<int>(dna.subprograms.size()); ++i) {
        if (dna.subprograms[i].label == label) return i;
    }
    return -1;
}

int find_activation(const Dna& dna) {
    int idx = find_sub(dna, "activation");
    if (idx >= 0) return idx;
    for (int i = 0; i < static_cast<int>(dna.subprograms.size()); ++i) {
        const auto& ins = dna.subprograms[i].instructions;
        if (!ins.empty() && ins[0].op == Op::Max && !ins[0].is_call() && ins.size() <= 2) return i;
    }
    return -1;
}

int find_projection(const Dna& dna) {
    int idx = find_sub(dna, "projection");
    if (idx >= 0) return idx;
    for (int i = 1; i < static_cast<int>(dna.subprograms.size()); ++i) {
        const auto& ins = dna.subprograms[i].instructions;
        if (!ins.empty() && !ins[0].is_call() && ins[0].op == Op::Conv1x1 && ins.size() <= 3) {
            return i;
        }
    }
    return -1;
}

int find_attention(const Dna& dna) {
    int idx = find_sub(dna, "attention");
    if (idx >= 0) return idx;
    for (int i = 0; i < static_cast<int>(dna.subprograms.size()); ++i) {
        for (const Instruction& ins : dna.subprograms[i].instructions) {
            if (!ins.is_call() && ins.op == Op::TMatMul) return i;
        }
    }
    return -1;
}

int find_zscore(const Dna& dna) {
    int idx = find_sub(dna, "zscore");
    if (idx >= 0) return idx;
    for (int i = 0; i < static_cast<int>(dna.subprograms.size()); ++i) {
        const auto& ins = dna.subprograms[i].instructions;
        bool has_diff = false, has_root = false;
        for (const Instruction& in : ins) {
            if (in.is_call()) continue;
            has_diff |= in.op == Op::Difference;
            has_root |= in.op == Op::AbsRoot;
        }
        if (has_diff && has_root) return i;
    }
    return -1;
}

int find_ff(const Dna& dna) { return find_sub(dna, "ff"); }

[[noreturn]] void not_applicable(ModificationFlag flag, const std::string& why) {
    throw ModificationNotApplicable(std::string(modification_name(flag)) + ": " + why);
}

// Remap hidden-state references after inserting `count` states at position
// `state` (exclusive) inside a subprogram.
void shift_refs(Subprogram& sub, int first_changed_instr, int inserted_at_state, int count) {
    for (int k = first_changed_instr; k < static_cast<int>(sub.instructions.size()); ++k) {
        Instruction& ins = sub.instructions[k];
        if (ins.input1 >= inserted_at_state) ins.input1 += count;
        if (ins.input2 >= inserted_at_state) ins.input2 += count;
    }
}

int dim_slot_holding(Dna& dna, int relative_value) {
    for (int i = 0; i < kDimsBankSize; ++i) {
        if (dna.dims[i] == relative_value) return i;
    }
    // repurpose the last slot; filler slots are only displayed, never used
    dna.dims[kDimsBankSize - 1] = relative_value;
    return kDimsBankSize - 1;
}

Dna squared_relu_apply(const Dna& in) {
    Dna dna = in;
    int si = find_activation(dna);
    if (si < 0) not_applicable(ModificationFlag::SquaredRelu, "no activation subprogram");
    auto& ins = dna.subprograms[si].instructions;
    if (!ins.empty() && !ins.back().is_call() && ins.back().op == Op::Square) return dna;
    const int last_state = static_cast<int>(ins.size()) + 1;
    ins.push_back(prim(Op::Square, last_state, last_state));
    return dna;
}

Dna squared_relu_remove(const Dna& in) {
    Dna dna = in;
    int si = find_activation(dna);
    if (si < 0) not_applicable(ModificationFlag::SquaredRelu, "no activation subprogram");
    auto& ins = dna.subprograms[si].instructions;
    if (ins.size() >= 2 && !ins.back().is_call() && ins.back().op == Op::Square) ins.pop_back();
    return dna;
}

Dna mdha_apply(const Dna& in) {
    Dna dna = in;
    int si = find_projection(dna);
    if (si < 0) not_applicable(ModificationFlag::Mdha, "no head-projection subprogram");
    auto& ins = dna.subprograms[si].instructions;
    for (std::size_t k = 0; k + 1 < ins.size(); ++k) {
        if (!ins[k].is_call() && ins[k].op == Op::Conv1x1 && !ins[k + 1].is_call() &&
            ins[k + 1].op == Op::DConv3x1) {
            return dna;  // already applied
        }
    }
    if (ins.empty() || ins[0].is_call() || ins[0].op != Op::Conv1x1) {
        not_applicable(ModificationFlag::Mdha, "projection subprogram has no leading DENSE");
    }
    // splice after the dense output (state 2): its consumers move to the conv
    shift_refs(dna.subprograms[si], 1, 2, 1);
    ins.insert(ins.begin() + 1, prim(Op::DConv3x1, 2, 0, 0, ins[0].dim_idx));
    return dna;
}

Dna mdha_remove(const Dna& in) {
    Dna dna = in;
    int si = find_projection(dna);
    if (si < 0) not_applicable(ModificationFlag::Mdha, "no head-projection subprogram");
    auto& ins = dna.subprograms[si].instructions;
    for (std::size_t k = 0; k < ins.size(); ++k) {
        if (!ins[k].is_call() && ins[k].op == Op::DConv3x1) {
            const int removed_state = static_cast<int>(k) + 2;
            const int splice_to = ins[k].input1;
            ins.erase(ins.begin() + k);
            for (std::size_t j = k; j < ins.size(); ++j) {
                auto remap = [&](int& ref) {
                    if (ref == removed_state) {
                        ref = splice_to;
                    } else if (ref > removed_state) {
                        ref -= 1;
                    }
                };
                remap(ins[j].input1);
                remap(ins[j].input2);
            }
            return dna;
        }
    }
    return dna;
}

// The two leading projection calls in the attention subprogram are the K and
// Q heads (K first, Q scaled afterwards). Shared QK replaces the Q projection
// with a dense transform of the K head's output.
struct AttentionHeads {
    int k_instr = -1;
    int q_instr = -1;
};

AttentionHeads locate_heads(const Subprogram& att) {
    AttentionHeads h;
    for (int k = 0; k < static_cast<int>(att.instructions.size()); ++k) {
        const Instruction& ins = att.instructions[k];
        const bool proj = ins.is_call() || ins.op == Op::Conv1x1;
        if (!proj) continue;
        if (h.k_instr < 0) {
            h.k_instr = k;
        } else if (h.q_instr < 0) {
            h.q_instr = k;
            break;
        }
    }
    return h;
}

Dna shared_qk_apply(const Dna& in) {
    Dna dna = in;
    int si = find_attention(dna);
    if (si < 0) not_applicable(ModificationFlag::SharedQk, "no attention subprogram");
    Subprogram& att = dna.subprograms[si];
    AttentionHeads h = locate_heads(att);
    if (h.k_instr < 0 || h.q_instr < 0) {
        not_applicable(ModificationFlag::SharedQk, "attention lacks two head projections");
    }
    Instruction& q = att.instructions[h.q_instr];
    const int k_state = h.k_instr + 2;
    if (!q.is_call() && q.op == Op::Conv1x1 && q.input1 == k_state) return dna;  // applied
    const int head_dim_idx = q.is_call() ? q.dim_idx : q.dim_idx;
    q = prim(Op::Conv1x1, k_state, 1, 0, head_dim_idx);
    return dna;
}

Dna shared_qk_remove(const Dna& in) {
    Dna dna = in;
    int si = find_attention(dna);
    if (si < 0) not_applicable(ModificationFlag::SharedQk, "no attention subprogram");
    Subprogram& att = dna.subprograms[si];
    AttentionHeads h = locate_heads(att);
    if (h.k_instr < 0 || h.q_instr < 0) return dna;
    Instruction& q = att.instructions[h.q_instr];
    const Instruction& k = att.instructions[h.k_instr];
    const int k_state = h.k_instr + 2;
    if (!q.is_call() && q.op == Op::Conv1x1 && q.input1 == k_state) {
        if (k.is_call()) {
            q = call(k.callee, k.input1, k.input2, k.constant_idx, k.dim_idx);
        } else {
            q = k;
        }
    }
    return dna;
}

struct NormFfPair {
    int norm_instr = -1;
    int ff_instr = -1;
    bool norm_first = false;
};

NormFfPair locate_norm_ff(const Dna& dna) {
    NormFfPair p;
    const int norm_idx = find_sub(dna, "norm");
    const int ff_idx = find_ff(dna);
    if (norm_idx < 0 || ff_idx < 0) return p;
    const Subprogram& main = dna.subprograms[0];
    for (int k = 0; k + 1 < static_cast<int>(main.instructions.size()); ++k) {
        const Instruction& a = main.instructions[k];
        const Instruction& b = main.instructions[k + 1];
        if (a.is_call() && b.is_call() && a.callee == norm_idx && b.callee == ff_idx &&
            b.input1 == k + 2) {
            p.norm_instr = k;
            p.ff_instr = k + 1;
            p.norm_first = true;
            return p;
        }
        if (a.is_call() && b.is_call() && a.callee == ff_idx && b.callee == norm_idx &&
            b.input1 == k + 2) {
            p.ff_instr = k;
            p.norm_instr = k + 1;
            p.norm_first = false;
            return p;
        }
    }
    return p;
}

Dna pre_post_norm_apply(const Dna& in) {
    Dna dna = in;
    NormFfPair p = locate_norm_ff(dna);
    if (p.norm_instr < 0) {
        not_applicable(ModificationFlag::PrePostNorm, "no adjacent norm/ff calls in main");
    }
    if (!p.norm_first) return dna;  // already post-norm
    Subprogram& main = dna.subprograms[0];
    Instruction norm = main.instructions[p.norm_instr];
    Instruction ff = main.instructions[p.ff_instr];
    const int slot_state = p.norm_instr + 2;
    ff.input1 = norm.input1;
    ff.input2 = norm.input2;
    norm.input1 = slot_state;
    norm.input2 = slot_state;
    main.instructions[p.norm_instr] = ff;
    main.instructions[p.ff_instr] = norm;
    return dna;
}

Dna pre_post_norm_remove(const Dna& in) {
    Dna dna = in;
    NormFfPair p = locate_norm_ff(dna);
    if (p.norm_instr < 0) {
        not_applicable(ModificationFlag::PrePostNorm, "no adjacent norm/ff calls in main");
    }
    if (p.norm_first) return dna;
    Subprogram& main = dna.subprograms[0];
    Instruction ff = main.instructions[p.ff_instr];
    Instruction norm = main.instructions[p.norm_instr];
    const int slot_state = p.ff_instr + 2;
    norm.input1 = ff.input1;
    norm.input2 = ff.input2;
    ff.input1 = slot_state;
    ff.input2 = slot_state;
    main.instructions[p.ff_instr] = norm;
    main.instructions[p.norm_instr] = ff;
    return dna;
}

Dna custom_norm_apply(const Dna& in) {
    Dna dna = in;
    int si = find_zscore(dna);
    if (si < 0) not_applicable(ModificationFlag::CustomNorm, "no z-score subprogram");
    for (Instruction& ins : dna.subprograms[si].instructions) {
        if (!ins.is_call() && ins.op == Op::Multiply && ins.input1 == ins.input2) {
            ins.input2 = 0;  // (x - mu) * x instead of (x - mu)^2
            return dna;
        }
    }
    return dna;
}

Dna custom_norm_remove(const Dna& in) {
    Dna dna = in;
    int si = find_zscore(dna);
    if (si < 0) not_applicable(ModificationFlag::CustomNorm, "no z-score subprogram");
    for (Instruction& ins : dna.subprograms[si].instructions) {
        if (!ins.is_call() && ins.op == Op::Multiply && ins.input2 == 0 && ins.input1 != 0) {
            ins.input2 = ins.input1;
            return dna;
        }
    }
    return dna;
}

Dna bottleneck_apply(const Dna& in) {
    Dna dna = in;
    int si = find_ff(dna);
    if (si < 0) not_applicable(ModificationFlag::Bottleneck12x, "no feed-forward subprogram");
    auto& ins = dna.subprograms[si].instructions;
    if (!ins.empty() && ins[0].is_call() && ins[0].branching == 2) return dna;  // applied
    if (ins.empty() || ins[0].is_call() || ins[0].op != Op::Conv1x1) {
        not_applicable(ModificationFlag::Bottleneck12x, "feed-forward has no leading DENSE");
    }
    // d_ff becomes 12 x d_model via two branches of 6 x d_model (relative 48)
    const int half_slot = dim_slot_holding(dna, 48);
    Subprogram up;
    up.label = "ffup";
    up.instructions.push_back(prim(Op::Conv1x1, 0, 1, 0, half_slot));
    dna.subprograms.push_back(std::move(up));  // invalidates `ins`
    const int up_idx = static_cast<int>(dna.subprograms.size()) - 1;
    Instruction& head = dna.subprograms[si].instructions[0];
    head = call(up_idx, head.input1, head.input2, head.constant_idx, half_slot, 2);
    return dna;
}

Dna bottleneck_remove(const Dna& in) {
    Dna dna = in;
    int si = find_ff(dna);
    if (si < 0) not_applicable(ModificationFlag::Bottleneck12x, "no feed-forward subprogram");
    auto& ins = dna.subprograms[si].instructions;
    if (ins.empty() || !ins[0].is_call() || ins[0].branching != 2) return dna;
    const int ff_slot = dim_slot_holding(dna, 32);  // back to 4 x d_model
    ins[0] = prim(Op::Conv1x1, ins[0].input1, ins[0].input2, ins[0].constant_idx, ff_slot);
    return dna;
}

int locate_softmax_call(const Dna& dna, int att_idx) {
    const int softmax_idx = find_sub(dna, "softmax");
    const auto& ins = dna.subprograms[att_idx].instructions;
    for (int k = 0; k < static_cast<int>(ins.size()); ++k) {
        if (ins[k].is_call() && (ins[k].callee == softmax_idx || softmax_idx < 0)) return k;
    }
    return -1;
}

Dna gating_apply(const Dna& in, bool variable_seq) {
    if (variable_seq) {
        not_applicable(ModificationFlag::PostSoftmaxSpatialGating,
                       "cannot be applied to variable sequence lengths");
    }
    Dna dna = in;
    int si = find_attention(dna);
    if (si < 0) not_applicable(ModificationFlag::PostSoftmaxSpatialGating, "no attention subprogram");
    Subprogram& att = dna.subprograms[si];
    int k = locate_softmax_call(dna, si);
    if (k < 0) {
        not_applicable(ModificationFlag::PostSoftmaxSpatialGating, "no softmax call in attention");
    }
    auto& ins = att.instructions;
    if (k + 1 < static_cast<int>(ins.size()) && !ins[k + 1].is_call() && ins[k + 1].op == Op::Tanh) {
        return dna;  // applied
    }
    const int softmax_state = k + 2;
    // consumers of the softmax output move to the gated value
    shift_refs(att, k + 1, softmax_state, 2);
    ins.insert(ins.begin() + k + 1, {prim(Op::Tanh, softmax_state, softmax_state),
                                     prim(Op::Scale, softmax_state + 1, softmax_state + 1)});
    return dna;
}

Dna gating_remove(const Dna& in) {
    Dna dna = in;
    int si = find_attention(dna);
    if (si < 0) not_applicable(ModificationFlag::PostSoftmaxSpatialGating, "no attention subprogram");
    Subprogram& att = dna.subprograms[si];
    int k = locate_softmax_call(dna, si);
    if (k < 0) return dna;
    auto& ins = att.instructions;
    if (k + 2 >= static_cast<int>(ins.size()) || ins[k + 1].is_call() ||
        ins[k + 1].op != Op::Tanh || ins[k + 2].is_call() || ins[k + 2].op != Op::Scale) {
        return dna;
    }
    const int softmax_state = k + 2;
    ins.erase(ins.begin() + k + 1, ins.begin() + k + 3);
    for (int j = k + 1; j < static_cast<int>(ins.size()); ++j) {
        auto remap = [&](int& ref) {
            if (ref == softmax_state + 1 || ref == softmax_state + 2) {
                ref = softmax_state;
            } else if (ref > softmax_state + 2) {
                ref -= 2;
            }
        };
        remap(ins[j].input1);
        remap(ins[j].input2);
    }
    return dna;
}

// x * sigmoid(1.702 x): the one-constant sigmoid form of the GELU
// approximation (the tanh form needs two dedicated constants, which the
// two-slot bank cannot spare next to the attention scaling constant).
constexpr double kGeluSigmoidConstant = 1.702;

bool is_gelu_body(const std::vector<Instruction>& ins) {
    return ins.size() == 3 && !ins[0].is_call() && ins[0].op == Op::CMul && !ins[1].is_call() &&
           ins[1].op == Op::Sigmoid && !ins[2].is_call() && ins[2].op == Op::Multiply;
}

Dna gelu_apply(const Dna& in) {
    Dna dna = in;
    int si = find_activation(dna);
    if (si < 0) not_applicable(ModificationFlag::Gelu, "no activation subprogram");
    auto& ins = dna.subprograms[si].instructions;
    if (is_gelu_body(ins)) return dna;
    dna.constants[0] = kGeluSigmoidConstant;
    ins = {prim(Op::CMul, 0, 0, 0, 0), prim(Op::Sigmoid, 2, 2), prim(Op::Multiply, 0, 3)};
    return dna;
}

Dna gelu_remove(const Dna& in) {
    Dna dna = in;
    int si = find_activation(dna);
    if (si < 0) not_applicable(ModificationFlag::Gelu, "no activation subprogram");
    auto& ins = dna.subprograms[si].instructions;
    if (!is_gelu_body(ins)) return dna;
    dna.constants[0] = 0.0;
    ins = {prim(Op::Max, 0, 0, 0, 0)};
    return dna;
}

bool is_swiglu_ff(const std::vector<Instruction>& ins) {
    return ins.size() >= 6 && !ins[1].is_call() && ins[1].op == Op::Sigmoid;
}

Dna swiglu_pp_apply(const Dna& in) {
    Dna dna = in;
    const int ff = find_ff(dna);
    const int zs = find_zscore(dna);
    if (ff < 0 || zs < 0) not_applicable(ModificationFlag::SwigluPp, "needs ff and z-score subprograms");
    auto& fins = dna.subprograms[ff].instructions;
    if (is_swiglu_ff(fins)) return dna;
    if (fins.empty() || fins[0].is_call() || fins[0].op != Op::Conv1x1) {
        not_applicable(ModificationFlag::SwigluPp, "feed-forward has no leading DENSE");
    }
    const int dff_idx = fins[0].dim_idx;
    int dmodel_idx = dff_idx;
    for (const Instruction& i2 : fins) {
        if (!i2.is_call() && i2.op == Op::Conv1x1 && i2.dim_idx != dff_idx) {
            dmodel_idx = i2.dim_idx;
        }
    }
    fins = {
        prim(Op::Conv1x1, 0, 0, 0, dff_idx),    // gate branch V
        prim(Op::Sigmoid, 2, 2),                // sigma(xV)
        prim(Op::Multiply, 2, 3),               // swish(xV)
        prim(Op::Conv1x1, 0, 0, 0, dff_idx),    // value branch U
        prim(Op::Multiply, 4, 5),               // swish(xV) * xU
        prim(Op::Conv1x1, 6, 6, 0, dmodel_idx),
        prim(Op::Shift, 7, 7),
    };
    // RMS-style norm: z-score with the mean forced to zero
    dna.subprograms[zs].instructions = {
        prim(Op::Multiply, 0, 0),
        prim(Op::RedMean, 2, 2),
        prim(Op::AbsRoot, 3, 3),
        prim(Op::Divide, 0, 4),
    };
    return dna;
}

Dna swiglu_pp_remove(const Dna& in) {
    Dna dna = in;
    const int ff = find_ff(dna);
    const int zs = find_zscore(dna);
    if (ff < 0 || zs < 0) not_applicable(ModificationFlag::SwigluPp, "needs ff and z-score subprograms");
    auto& fins = dna.subprograms[ff].instructions;
    if (!is_swiglu_ff(fins)) return dna;
    const int dff_idx = fins[0].dim_idx;
    int dmodel_idx = dff_idx;
    for (const Instruction& i2 : fins) {
        if (!i2.is_call() && i2.op == Op::Conv1x1 && i2.dim_idx != dff_idx) {
            dmodel_idx = i2.dim_idx;
        }
    }
    fins = {
        prim(Op::Conv1x1, 0, 0, 0, dff_idx),
        prim(Op::Shift, 2, 2),
        prim(Op::Max, 3, 3, 0, 0),
        prim(Op::Conv1x1, 4, 4, 0, dmodel_idx),
        prim(Op::Shift, 5, 5),
    };
    dna.subprograms[zs].instructions = {
        prim(Op::RedMean, 0, 0),   prim(Op::Difference, 0, 2), prim(Op::Multiply, 3, 3),
        prim(Op::RedMean, 4, 4),   prim(Op::AbsRoot, 5, 5),    prim(Op::Divide, 3, 6),
    };
    return dna;
}

}  // namespace

const Dna& transformer_seed() {
    static const Dna dna = build_transformer();
    return dna;
}

const Dna& primer_seed() {
    static const Dna dna = build_primer();
    return dna;
}

const Dna& primer_ez_seed() {
    static const Dna dna = [] {
        Dna d = apply_modification(transformer_seed(), ModificationFlag::Mdha);
        d = apply_modification(d, ModificationFlag::SquaredRelu);
        d.meta.lineage = 3;
        return d;
    }();
    return dna;
}

const Dna& transformer_gelu_seed() {
    static const Dna dna = [] {
        Dna d = apply_modification(transformer_seed(), ModificationFlag::Gelu);
        d.meta.lineage = 4;
        return d;
    }();
    return dna;
}

const Dna& transformer_pp_seed() {
    static const Dna dna = [] {
        Dna d = apply_modification(transformer_seed(), ModificationFlag::SwigluPp);
        d.meta.lineage = 5;
        return d;
    }();
    return dna;
}

Dna primer_verbatim() {
    Dna d = parse_program(flatten_program(primer_seed(), 48, 384));
    // the flat listing rounds the bank constants to two decimals; restore them
    d.constants = primer_seed().constants;
    d.meta.lineage = 6;
    return d;
}

std::optional<Dna> seed_by_name(const std::string& name) {
    if (name == "transformer") return transformer_seed();
    if (name == "primer") return primer_seed();
    if (name == "primer_ez") return primer_ez_seed();
    if (name == "transformer_gelu") return transformer_gelu_seed();
    if (name == "transformer_pp") return transformer_pp_seed();
    if (name == "primer_verbatim") return primer_verbatim();
    return std::nullopt;
}

std::vector<std::string> seed_names() {
    return {"transformer", "primer", "primer_ez", "transformer_gelu", "transformer_pp",
            "primer_verbatim"};
}

int seed_native_scale_unit(const std::string& name) {
    // primer_ez keeps the transformer's banks; only the discovered program
    // family sizes itself around the 48-wide heads
    return (name == "primer" || name == "primer_verbatim") ? 48 : 64;
}

const char* modification_name(ModificationFlag flag) {
    switch (flag) {
        case ModificationFlag::SquaredRelu: return "squared_relu";
        case ModificationFlag::Mdha: return "mdha";
        case ModificationFlag::SharedQk: return "shared_qk";
        case ModificationFlag::PrePostNorm: return "pre_post_norm";
        case ModificationFlag::CustomNorm: return "custom_norm";
        case ModificationFlag::Bottleneck12x: return "bottleneck_12x";
        case ModificationFlag::PostSoftmaxSpatialGating: return "spatial_gating";
        case ModificationFlag::Gelu: return "gelu";
        case ModificationFlag::SwigluPp: return "swiglu_pp";
    }
    return "?";
}

std::optional<ModificationFlag> modification_from_name(const std::string& name) {
    for (ModificationFlag f : all_modifications()) {
        if (name == modification_name(f)) return f;
    }
    return std::nullopt;
}

std::vector<ModificationFlag> all_modifications() {
    return {ModificationFlag::SquaredRelu,  ModificationFlag::Mdha,
            ModificationFlag::SharedQk,     ModificationFlag::PrePostNorm,
            ModificationFlag::CustomNorm,   ModificationFlag::Bottleneck12x,
            ModificationFlag::PostSoftmaxSpatialGating, ModificationFlag::Gelu,
            ModificationFlag::SwigluPp};
}

Dna apply_modification(const Dna& dna, ModificationFlag flag, bool variable_seq) {
    switch (flag) {
        case ModificationFlag::SquaredRelu: return squared_relu_apply(dna);
        case ModificationFlag::Mdha: return mdha_apply(dna);
        case ModificationFlag::SharedQk: return shared_qk_apply(dna);
        case ModificationFlag::PrePostNorm: return pre_post_norm_apply(dna);
        case ModificationFlag::CustomNorm: return custom_norm_apply(dna);
        case ModificationFlag::Bottleneck12x: return bottleneck_apply(dna);
        case ModificationFlag::PostSoftmaxSpatialGating: return gating_apply(dna, variable_seq);
        case ModificationFlag::Gelu: return gelu_apply(dna);
        case ModificationFlag::SwigluPp: return swiglu_pp_apply(dna);
    }
    throw ContractViolation("unknown modification flag");
}

Dna remove_modification(const Dna& dna, ModificationFlag flag) {
    switch (flag) {
        case ModificationFlag::SquaredRelu: return squared_relu_remove(dna);
        case ModificationFlag::Mdha: return mdha_remove(dna);
        case ModificationFlag::SharedQk: return shared_qk_remove(dna);
        case ModificationFlag::PrePostNorm: return pre_post_norm_remove(dna);
        case ModificationFlag::CustomNorm: return custom_norm_remove(dna);
        case ModificationFlag::Bottleneck12x: return bottleneck_remove(dna);
        case ModificationFlag::PostSoftmaxSpatialGating: return gating_remove(dna);
        case ModificationFlag::Gelu: return gelu_remove(dna);
        case ModificationFlag::SwigluPp: return swiglu_pp_remove(dna);
    }
    throw ContractViolation("unknown modification flag");
}

bool modification_applicable(const Dna& dna, ModificationFlag flag, bool variable_seq) {
    try {
        (void)apply_modification(dna, flag, variable_seq);
        return true;
    } catch (const ModificationNotApplicable&) {
        return false;
    }
}

// ---------------------------------------------------------------------------
// Activation zoo
// ---------------------------------------------------------------------------

std::optional<Activation> activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "squared_relu") return Activation::SquaredRelu;
    if (name == "gelu") return Activation::GeluApprox;
    if (name == "swish") return Activation::Swish;
    if (name == "reglu") return Activation::Reglu;
    if (name == "swiglu") return Activation::Swiglu;
    return std::nullopt;
}

Tensor activation(Activation kind, const Tensor& x) {
    Tensor out = x;
    switch (kind) {
        case Activation::Relu:
            for (double& v : out.vec()) v = std::max(v, 0.0);
            return out;
        case Activation::SquaredRelu:
            for (double& v : out.vec()) {
                const double r = std::max(v, 0.0);
                v = r * r;
            }
            return out;
        case Activation::GeluApprox: {
            const double c = std::sqrt(2.0 / M_PI);
            for (double& v : out.vec()) {
                v = 0.5 * v * (1.0 + std::tanh(c * (v + 0.044715 * v * v * v)));
            }
            return out;
        }
        case Activation::Swish:
            for (double& v : out.vec()) v = v / (1.0 + std::exp(-v));
            return out;
        case Activation::Reglu:
        case Activation::Swiglu:
            throw ContractViolation("GLU activations require gate weights");
    }
    throw ContractViolation("unknown activation");
}

Tensor activation_glu(Activation kind, const Tensor& x, const Tensor& u, const Tensor& v) {
    if (kind != Activation::Reglu && kind != Activation::Swiglu) {
        throw ContractViolation("activation_glu: not a GLU variant");
    }
    Tensor zeros_u(1, 1, u.channel());
    Tensor zeros_v(1, 1, v.channel());
    Tensor ux = kernels::conv1x1(x, u, zeros_u);
    Tensor vx = kernels::conv1x1(x, v, zeros_v);
    Tensor gate = activation(kind == Activation::Reglu ? Activation::Relu : Activation::Swish, vx);
    return kernels::apply_binary(Op::Multiply, ux, gate);
}

Tensor squared_relu(const Tensor& x) { return activation(Activation::SquaredRelu, x); }

Tensor mdha_projection(const Tensor& x, const Tensor& proj_w, const Tensor& proj_b,
                       const Tensor& dconv_taps) {
    Tensor head = kernels::conv1x1(x, proj_w, proj_b);
    return kernels::dconv_kx1(head, dconv_taps, dconv_taps.seq());
}

Tensor custom_norm(const Tensor& x) {
    Tensor mu = kernels::apply_reduction(Op::RedMean, x);
    Tensor d = kernels::apply_binary(Op::Difference, x, mu);
    Tensor v = kernels::apply_reduction(Op::RedMean, kernels::apply_binary(Op::Multiply, d, x));
    Tensor denom = kernels::apply_unary(Op::AbsRoot, v, 0.0);
    return kernels::apply_binary(Op::Divide, d, denom);
}

Tensor standard_z_norm(const Tensor& x) {
    Tensor mu = kernels::apply_reduction(Op::RedMean, x);
    Tensor d = kernels::apply_binary(Op::Difference, x, mu);
    Tensor v = kernels::apply_reduction(Op::RedMean, kernels::apply_binary(Op::Multiply, d, d));
    Tensor denom = kernels::apply_unary(Op::AbsRoot, v, 0.0);
    return kernels::apply_binary(Op::Divide, d, denom);
}

}  // namespace primevo
