// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "primevo/common.hpp"
#include "primevo/ops.hpp"

namespace primevo {

// Vocabulary for relative dimensions (resolved size = value * scale_unit).
constexpr std::array<int, 10> kDimsVocabulary = {1, 2, 4, 8, 12, 16, 24, 32, 48, 64};
constexpr std::array<int, 5> kBranchingChoices = {1, 2, 4, 8, 16};
constexpr int kConstantsBankSize = 2;
constexpr int kDimsBankSize = 6;

bool dims_vocabulary_contains(int v);

// One line of a subprogram. The full argument set is always present; fields
// an operation does not use are carried along untouched.
struct Instruction {
    Op op = Op::Add;
    int callee = -1;  // >= 0: call that subprogram instead of a primitive
    int input1 = 0;   // hidden-state index (inputs live at 0 and 1)
    int input2 = 0;
    int constant_idx = 0;  // into the constants bank
    int dim_idx = 0;       // into the dims bank
    int branching = 1;

    bool is_call() const { return callee >= 0; }
    bool operator==(const Instruction&) const = default;
};

// Indexed instruction list; instruction k writes hidden state k + 2 and the
// final instruction's tensor is the subprogram output.
struct Subprogram {
    std::vector<Instruction> instructions;
    std::string label;  // optional role tag ("main", "activation", ...)

    bool operator==(const Subprogram&) const = default;
};

struct DnaMeta {
    std::uint64_t lineage = 0;  // seed for site-keyed pseudorandom decisions
    std::int64_t parent = -1;
    std::int64_t birth = 0;

    bool operator==(const DnaMeta&) const = default;
};

// The unit of evolution: subprograms (index 0 is the entry point) plus the
// shared constant and relative-dimension value banks.
struct Dna {
    std::vector<Subprogram> subprograms;
    std::array<double, kConstantsBankSize> constants{0.0, 0.0};
    std::array<int, kDimsBankSize> dims{1, 1, 1, 1, 1, 1};
    DnaMeta meta;

    bool operator==(const Dna& o) const {
        return subprograms == o.subprograms && constants == o.constants && dims == o.dims;
    }
};

// Structural invariants: bank sizes and vocabularies, branching values,
// no forward references, calls only to strictly higher subprogram indices,
// no empty subprograms. Throws ContractViolation.
void validate(const Dna& dna);
bool is_valid(const Dna& dna);

// Canonical text format (bank indices, exact round-trip). Detects and also
// accepts the flattened listing dialect ("(k) OP In0: i In1: j Dim: d C: c"),
// reconstructing banks greedily by value and branch regions as subprograms.
Dna parse_program(const std::string& text);
std::string serialize_program(const Dna& dna);

// Flattened listing view with subprogram calls inlined, branch regions marked
// and all bank values resolved at the given scale unit. d_model is the width
// of the two input slots. Implemented alongside the compiler (shares width
// rules); suitable for byte-level comparison against program listings.
std::string flatten_program(const Dna& dna, int scale_unit, int d_model);

// Uniform random single-subprogram program of the given length; arguments are
// drawn over their valid ranges, ops over the primitive vocabulary.
Dna random_dna(Rng& rng, int length);

}  // namespace primevo
