// SPDX-License-Identifier: Apache-2.0

#include "primevo/dna.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <sstream>

namespace primevo {

bool dims_vocabulary_contains(int v) {
    return std::find(kDimsVocabulary.begin(), kDimsVocabulary.end(), v) != kDimsVocabulary.end();
}

void validate(const Dna& dna) {
    if (dna.subprograms.empty()) throw ContractViolation("dna has no subprograms");
    for (int d : dna.dims) {
        if (!dims_vocabulary_contains(d)) {
            throw ContractViolation("dims bank value " + std::to_string(d) +
                                    " outside the relative-dimension vocabulary");
        }
    }
    const int nsub = static_cast<int>(dna.subprograms.size());
    for (int si = 0; si < nsub; ++si) {
        const Subprogram& sub = dna.subprograms[si];
        if (sub.instructions.empty()) {
            throw ContractViolation("subprogram " + std::to_string(si) +
                                    " is empty; a subprogram must produce an output");
        }
        for (int k = 0; k < static_cast<int>(sub.instructions.size()); ++k) {
            const Instruction& ins = sub.instructions[k];
            if (ins.is_call()) {
                if (ins.callee <= si || ins.callee >= nsub) {
                    throw ContractViolation("subprogram " + std::to_string(si) +
                                            " calls index " + std::to_string(ins.callee) +
                                            "; calls must target strictly higher indices");
                }
            } else if (!is_primitive(ins.op)) {
                throw ContractViolation("instruction op is not in the primitives vocabulary");
            }
            if (ins.input1 < 0 || ins.input1 >= k + 2 || ins.input2 < 0 || ins.input2 >= k + 2) {
                throw ContractViolation("instruction " + std::to_string(k) + " of subprogram " +
                                        std::to_string(si) + " references a future hidden state");
            }
            if (ins.constant_idx < 0 || ins.constant_idx >= kConstantsBankSize ||
                ins.dim_idx < 0 || ins.dim_idx >= kDimsBankSize) {
                throw ContractViolation("bank index out of range");
            }
            if (std::find(kBranchingChoices.begin(), kBranchingChoices.end(), ins.branching) ==
                kBranchingChoices.end()) {
                throw ContractViolation("branching factor " + std::to_string(ins.branching) +
                                        " not in {1,2,4,8,16}");
            }
        }
    }
}

bool is_valid(const Dna& dna) {
    try {
        validate(dna);
        return true;
    } catch (const EngineError&) {
        return false;
    }
}

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string instr_op_name(const Instruction& ins) {
    if (ins.is_call()) return "CALL_" + std::to_string(ins.callee);
    return op_name(ins.op);
}

std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

}  // namespace

std::string serialize_program(const Dna& dna) {
    std::ostringstream out;
    out << "primevo dna v1\n";
    out << "lineage: " << dna.meta.lineage << " parent: " << dna.meta.parent
        << " birth: " << dna.meta.birth << "\n";
    out << "constants:";
    for (double c : dna.constants) out << ' ' << format_double(c);
    out << "\ndims:";
    for (int d : dna.dims) out << ' ' << d;
    out << "\n";
    for (int si = 0; si < static_cast<int>(dna.subprograms.size()); ++si) {
        const Subprogram& sub = dna.subprograms[si];
        out << "sub " << si;
        if (!sub.label.empty()) out << ' ' << sub.label;
        out << "\n";
        out << "(0)  INPUT\n(1)  INPUT\n";
        for (int k = 0; k < static_cast<int>(sub.instructions.size()); ++k) {
            const Instruction& ins = sub.instructions[k];
            char head[16];
            std::snprintf(head, sizeof(head), "(%d)", k + 2);
            out << pad(head, 5) << pad(instr_op_name(ins), 23);
            char args[128];
            std::snprintf(args, sizeof(args), "In0: %-5dIn1: %-5dC#: %-3dD#: %-3dBr: %d",
                          ins.input1, ins.input2, ins.constant_idx, ins.dim_idx, ins.branching);
            out << args << "\n";
        }
    }
    return out.str();
}

namespace {

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> toks;
    std::istringstream in(line);
    std::string t;
    while (in >> t) toks.push_back(t);
    return toks;
}

int parse_int(const std::string& s, int lineno, const char* what) {
    try {
        std::size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(lineno, std::string("expected integer for ") + what + ", got '" + s + "'");
    }
}

double parse_num(const std::string& s, int lineno, const char* what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(lineno, std::string("expected number for ") + what + ", got '" + s + "'");
    }
}

// Field tokens come in pairs like "In0:" "7"; verify the tag and read the value.
std::string take_field(const std::vector<std::string>& toks, std::size_t& i, const char* tag,
                       int lineno) {
    if (i + 1 >= toks.size() || toks[i] != tag) {
        throw ParseError(lineno, std::string("expected field '") + tag + "'");
    }
    i += 1;
    return toks[i++];
}

Dna parse_canonical(const std::vector<std::string>& lines) {
    Dna dna;
    dna.subprograms.clear();
    std::size_t li = 1;  // header already checked
    auto next_tokens = [&](const char* what) {
        while (li < lines.size() && tokenize(lines[li]).empty()) ++li;
        if (li >= lines.size()) throw ParseError(static_cast<int>(li + 1), std::string("missing ") + what);
        return tokenize(lines[li]);
    };

    {
        auto toks = next_tokens("metadata line");
        if (toks.size() != 6 || toks[0] != "lineage:" || toks[2] != "parent:" || toks[4] != "birth:") {
            throw ParseError(static_cast<int>(li + 1), "malformed metadata line");
        }
        dna.meta.lineage = static_cast<std::uint64_t>(std::stoull(toks[1]));
        dna.meta.parent = std::stoll(toks[3]);
        dna.meta.birth = std::stoll(toks[5]);
        ++li;
    }
    {
        auto toks = next_tokens("constants line");
        if (toks.size() != 1 + kConstantsBankSize || toks[0] != "constants:") {
            throw ParseError(static_cast<int>(li + 1), "constants bank must declare exactly 2 values");
        }
        for (int i = 0; i < kConstantsBankSize; ++i) {
            dna.constants[i] = parse_num(toks[1 + i], static_cast<int>(li + 1), "constant");
        }
        ++li;
    }
    {
        auto toks = next_tokens("dims line");
        if (toks.size() != 1 + kDimsBankSize || toks[0] != "dims:") {
            throw ParseError(static_cast<int>(li + 1), "dims bank must declare exactly 6 values");
        }
        for (int i = 0; i < kDimsBankSize; ++i) {
            dna.dims[i] = parse_int(toks[1 + i], static_cast<int>(li + 1), "dim");
            if (!dims_vocabulary_contains(dna.dims[i])) {
                throw ParseError(static_cast<int>(li + 1),
                                 "dims bank value " + toks[1 + i] +
                                     " outside the relative-dimension vocabulary");
            }
        }
        ++li;
    }

    while (li < lines.size()) {
        auto toks = tokenize(lines[li]);
        if (toks.empty()) {
            ++li;
            continue;
        }
        const int lineno = static_cast<int>(li + 1);
        if (toks[0] != "sub") throw ParseError(lineno, "expected 'sub <index>'");
        int idx = parse_int(toks[1], lineno, "subprogram index");
        if (idx != static_cast<int>(dna.subprograms.size())) {
            throw ParseError(lineno, "subprogram indices must be consecutive from 0");
        }
        Subprogram sub;
        if (toks.size() > 2) sub.label = toks[2];
        ++li;
        // instruction block
        while (li < lines.size()) {
            auto itoks = tokenize(lines[li]);
            if (itoks.empty()) {
                ++li;
                continue;
            }
            if (itoks[0] == "sub") break;
            const int ilineno = static_cast<int>(li + 1);
            if (itoks.size() >= 2 && itoks[1] == "INPUT") {
                ++li;
                continue;
            }
            if (itoks.size() < 2) throw ParseError(ilineno, "malformed instruction line");
            Instruction ins;
            const std::string& name = itoks[1];
            if (name.rfind("CALL_", 0) == 0) {
                ins.callee = parse_int(name.substr(5), ilineno, "callee index");
            } else {
                auto op = op_from_name(name);
                if (!op || !is_primitive(*op)) {
                    throw ParseError(ilineno, "unknown opcode '" + name + "'");
                }
                ins.op = *op;
            }
            std::size_t ti = 2;
            ins.input1 = parse_int(take_field(itoks, ti, "In0:", ilineno), ilineno, "In0");
            ins.input2 = parse_int(take_field(itoks, ti, "In1:", ilineno), ilineno, "In1");
            ins.constant_idx = parse_int(take_field(itoks, ti, "C#:", ilineno), ilineno, "C#");
            ins.dim_idx = parse_int(take_field(itoks, ti, "D#:", ilineno), ilineno, "D#");
            ins.branching = parse_int(take_field(itoks, ti, "Br:", ilineno), ilineno, "Br");
            sub.instructions.push_back(ins);
            ++li;
        }
        if (sub.instructions.empty()) {
            throw ParseError(lineno, "subprogram " + std::to_string(idx) +
                                         " is empty; a subprogram must produce an output");
        }
        dna.subprograms.push_back(std::move(sub));
    }
    if (dna.subprograms.empty()) throw ParseError(static_cast<int>(lines.size()), "no subprograms");
    try {
        validate(dna);
    } catch (const EngineError& e) {
        throw ParseError(static_cast<int>(lines.size()), e.what());
    }
    return dna;
}

struct FlatLine {
    int index = 0;
    std::string name;
    int in0 = 0, in1 = 0;
    int dim = 0;
    double c = 0.0;
    int lineno = 0;
    bool is_input = false;
};

int bank_index_for_dim(Dna& dna, std::vector<int>& seen, int value, int lineno) {
    for (int i = 0; i < static_cast<int>(seen.size()); ++i) {
        if (seen[i] == value) return i;
    }
    if (static_cast<int>(seen.size()) >= kDimsBankSize) {
        throw ParseError(lineno, "more than 6 distinct dimension values declared");
    }
    seen.push_back(value);
    return static_cast<int>(seen.size()) - 1;
}

int bank_index_for_const(Dna& dna, std::vector<double>& seen, double value, int lineno) {
    for (int i = 0; i < static_cast<int>(seen.size()); ++i) {
        if (seen[i] == value) return i;
    }
    if (static_cast<int>(seen.size()) >= kConstantsBankSize) {
        throw ParseError(lineno, "more than 2 distinct constant values declared");
    }
    seen.push_back(value);
    return static_cast<int>(seen.size()) - 1;
}

// Flattened-listing dialect: rebuild branch regions as subprograms and banks
// greedily by value. The scale unit is inferred as the largest unit mapping
// every dimension into the relative vocabulary.
Dna parse_flat(const std::vector<std::string>& lines) {
    std::vector<FlatLine> fl;
    for (std::size_t li = 0; li < lines.size(); ++li) {
        auto toks = tokenize(lines[li]);
        if (toks.empty()) continue;
        if (toks[0].front() != '(') {
            if (fl.empty()) continue;  // title line
            throw ParseError(static_cast<int>(li + 1), "malformed instruction line");
        }
        FlatLine f;
        f.lineno = static_cast<int>(li + 1);
        std::string idx = toks[0].substr(1, toks[0].size() - 2);
        f.index = parse_int(idx, f.lineno, "instruction index");
        f.name = toks[1];
        if (f.name == "INPUT") {
            f.is_input = true;
            fl.push_back(f);
            continue;
        }
        std::size_t ti = 2;
        f.in0 = parse_int(take_field(toks, ti, "In0:", f.lineno), f.lineno, "In0");
        f.in1 = parse_int(take_field(toks, ti, "In1:", f.lineno), f.lineno, "In1");
        f.dim = parse_int(take_field(toks, ti, "Dim:", f.lineno), f.lineno, "Dim");
        f.c = parse_num(take_field(toks, ti, "C:", f.lineno), f.lineno, "C");
        fl.push_back(f);
    }
    if (fl.size() < 3 || !fl[0].is_input || !fl[1].is_input) {
        throw ParseError(1, "flattened program must start with two INPUT lines");
    }
    for (std::size_t i = 0; i < fl.size(); ++i) {
        if (fl[i].index != static_cast<int>(i)) {
            throw ParseError(fl[i].lineno, "instruction indices must be consecutive");
        }
    }

    Dna dna;
    dna.subprograms.clear();
    dna.subprograms.emplace_back();
    dna.subprograms[0].label = "main";
    std::vector<int> dim_values;
    std::vector<double> const_values;

    // state map: flat hidden-state index -> main-subprogram hidden-state index
    std::vector<int> to_main(fl.size(), -1);
    to_main[0] = 0;
    to_main[1] = 1;

    auto parse_primitive = [&](const FlatLine& f) {
        auto op = op_from_name(f.name);
        if (!op || !is_primitive(*op)) {
            throw ParseError(f.lineno, "unknown opcode '" + f.name + "'");
        }
        return *op;
    };

    std::size_t i = 2;
    while (i < fl.size()) {
        const FlatLine& f = fl[i];
        if (f.name.rfind("BRANCH_MERGE", 0) == 0) {
            throw ParseError(f.lineno, "BRANCH_MERGE without a matching branch region");
        }
        if (f.name.rfind("BRANCH_", 0) == 0) {
            // BRANCH_<k>_INPUT_1 / _2 bracket a region that becomes a subprogram.
            std::size_t us = f.name.find('_', 7);
            if (us == std::string::npos || f.name.substr(us) != "_INPUT_1") {
                throw ParseError(f.lineno, "expected BRANCH_<k>_INPUT_1");
            }
            int factor = parse_int(f.name.substr(7, us - 7), f.lineno, "branch factor");
            if (i + 1 >= fl.size() ||
                fl[i + 1].name != "BRANCH_" + std::to_string(factor) + "_INPUT_2") {
                throw ParseError(f.lineno, "BRANCH_INPUT_1 must be followed by BRANCH_INPUT_2");
            }
            const int m1 = static_cast<int>(i), m2 = static_cast<int>(i + 1);
            std::size_t j = i + 2;
            Subprogram body;
            while (j < fl.size() && fl[j].name != "BRANCH_MERGE") {
                const FlatLine& bf = fl[j];
                if (bf.name.rfind("BRANCH_", 0) == 0) {
                    throw ParseError(bf.lineno, "nested branch regions are not expressible here");
                }
                Instruction ins;
                ins.op = parse_primitive(bf);
                auto local = [&](int flat, int lineno) {
                    if (flat == m1) return 0;
                    if (flat == m2) return 1;
                    if (flat > m2 && flat < static_cast<int>(j)) return flat - m2 + 1;
                    throw ParseError(lineno, "branch body references a state outside the region");
                };
                ins.input1 = local(bf.in0, bf.lineno);
                ins.input2 = local(bf.in1, bf.lineno);
                ins.dim_idx = bank_index_for_dim(dna, dim_values, bf.dim, bf.lineno);
                ins.constant_idx = bank_index_for_const(dna, const_values, bf.c, bf.lineno);
                body.instructions.push_back(ins);
                ++j;
            }
            if (j >= fl.size()) throw ParseError(f.lineno, "branch region never merges");
            if (body.instructions.empty()) {
                throw ParseError(fl[j].lineno, "empty branch region");
            }
            const FlatLine& merge = fl[j];
            if (merge.in0 != static_cast<int>(j - 1)) {
                throw ParseError(merge.lineno, "BRANCH_MERGE must take the final body state");
            }
            dna.subprograms.push_back(std::move(body));
            Instruction call;
            call.callee = static_cast<int>(dna.subprograms.size()) - 1;
            auto main_state = [&](int flat, int lineno) {
                if (flat < 0 || flat >= static_cast<int>(to_main.size()) || to_main[flat] < 0) {
                    throw ParseError(lineno, "reference to a state inside another branch region");
                }
                return to_main[flat];
            };
            call.input1 = main_state(f.in0, f.lineno);
            call.input2 = main_state(fl[i + 1].in0, fl[i + 1].lineno);
            call.branching = factor;
            call.dim_idx = bank_index_for_dim(dna, dim_values, f.dim, f.lineno);
            call.constant_idx = bank_index_for_const(dna, const_values, f.c, f.lineno);
            dna.subprograms[0].instructions.push_back(call);
            to_main[j] = static_cast<int>(dna.subprograms[0].instructions.size()) + 1;
            i = j + 1;
            continue;
        }
        Instruction ins;
        ins.op = parse_primitive(f);
        auto main_state = [&](int flat, int lineno) {
            if (flat < 0 || flat >= static_cast<int>(to_main.size()) || to_main[flat] < 0) {
                throw ParseError(lineno, "reference to a state inside a branch region");
            }
            return to_main[flat];
        };
        ins.input1 = main_state(f.in0, f.lineno);
        ins.input2 = main_state(f.in1, f.lineno);
        ins.dim_idx = bank_index_for_dim(dna, dim_values, f.dim, f.lineno);
        ins.constant_idx = bank_index_for_const(dna, const_values, f.c, f.lineno);
        dna.subprograms[0].instructions.push_back(ins);
        to_main[i] = static_cast<int>(dna.subprograms[0].instructions.size()) + 1;
        ++i;
    }
    if (dna.subprograms[0].instructions.empty()) {
        throw ParseError(static_cast<int>(fl.back().lineno), "program has no instructions");
    }

    // Infer the largest scale unit mapping every declared dimension into the
    // relative vocabulary, then store relative values in the bank.
    const int max_dim = *std::max_element(kDimsVocabulary.begin(), kDimsVocabulary.end());
    int unit = 0;
    for (int su = 4096; su >= 1; --su) {
        bool ok = true;
        for (int v : dim_values) {
            if (v % su != 0 || !dims_vocabulary_contains(v / su)) {
                ok = false;
                break;
            }
        }
        if (ok) {
            unit = su;
            break;
        }
    }
    if (unit == 0 && !dim_values.empty()) {
        throw ParseError(fl.back().lineno,
                         "dimension values are not expressible as relative dimensions");
    }
    (void)max_dim;
    for (std::size_t k = 0; k < dim_values.size(); ++k) dna.dims[k] = dim_values[k] / unit;
    for (std::size_t k = dim_values.size(); k < kDimsBankSize; ++k) {
        dna.dims[k] = dim_values.empty() ? 1 : dim_values[0] / unit;
    }
    for (std::size_t k = 0; k < const_values.size(); ++k) dna.constants[k] = const_values[k];
    for (std::size_t k = const_values.size(); k < kConstantsBankSize; ++k) {
        dna.constants[k] = const_values.empty() ? 0.0 : const_values[0];
    }
    try {
        validate(dna);
    } catch (const EngineError& e) {
        throw ParseError(fl.back().lineno, e.what());
    }
    return dna;
}

}  // namespace

Dna parse_program(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    std::size_t first = 0;
    while (first < lines.size() && tokenize(lines[first]).empty()) ++first;
    if (first >= lines.size()) throw ParseError(1, "empty program");
    if (tokenize(lines[first])[0] == "primevo") {
        lines.erase(lines.begin(), lines.begin() + first);
        return parse_canonical(lines);
    }
    return parse_flat(lines);
}

Dna random_dna(Rng& rng, int length) {
    Dna dna;
    dna.subprograms.clear();
    Subprogram sub;
    for (int k = 0; k < length; ++k) {
        Instruction ins;
        ins.op = static_cast<Op>(rng.index(kNumPrimitives));
        ins.input1 = static_cast<int>(rng.index(k + 2));
        ins.input2 = static_cast<int>(rng.index(k + 2));
        ins.constant_idx = static_cast<int>(rng.index(kConstantsBankSize));
        ins.dim_idx = static_cast<int>(rng.index(kDimsBankSize));
        ins.branching = kBranchingChoices[rng.index(kBranchingChoices.size())];
        sub.instructions.push_back(ins);
    }
    dna.subprograms.push_back(std::move(sub));
    for (int i = 0; i < kConstantsBankSize; ++i) dna.constants[i] = rng.normal();
    for (int i = 0; i < kDimsBankSize; ++i) {
        dna.dims[i] = kDimsVocabulary[rng.index(kDimsVocabulary.size())];
    }
    dna.meta.lineage = rng.bits();
    return dna;
}

}  // namespace primevo
