#pragma once

// Feature blocks for a set of decision rows and the named combinations of them.
//
//   G  game-state block       T  dialogue embedding (PCA)
//   O  Observer embedding     L  Observer logit
//   I  identity indicators

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "counterpart/errors.hpp"
#include "counterpart/table.hpp"

namespace counterpart {

struct FeatureStack {
    bool game = false;
    bool text = false;
    bool observer = false;
    bool logit = false;
    bool identity = false;

    /// "G+T+O+I", "G,T", "GTI" and the like.
    static FeatureStack parse(std::string_view s) {
        FeatureStack st;
        for (const char c : s) {
            switch (c) {
                case 'G': st.game = true; break;
                case 'T': st.text = true; break;
                case 'O': st.observer = true; break;
                case 'L': st.logit = true; break;
                case 'I': st.identity = true; break;
                case '+': case ',': case ' ': break;
                default: throw ConfigError("unknown feature block '" + std::string(1, c) + "' in '" + std::string(s) + "'");
            }
        }
        if (!(st.game || st.text || st.observer || st.logit || st.identity)) throw ConfigError("empty feature stack");
        return st;
    }

    std::string to_string() const {
        std::string s;
        auto add = [&](bool on, char c) {
            if (!on) return;
            if (!s.empty()) s += '+';
            s += c;
        };
        add(game, 'G');
        add(text, 'T');
        add(observer, 'O');
        add(logit, 'L');
        add(identity, 'I');
        return s;
    }

    bool operator==(const FeatureStack&) const = default;
};

struct NamedStack {
    std::string name;
    FeatureStack stack;
};

/// The ablation set: the full stack, leave-one-out variants, and small stacks.
inline std::vector<NamedStack> ablation_stacks() {
    return {{"Full", FeatureStack::parse("GTOI")}, {"-O", FeatureStack::parse("GTI")}, {"-T", FeatureStack::parse("GOI")},
            {"-G", FeatureStack::parse("TOI")},    {"-I", FeatureStack::parse("GTO")}, {"G+I", FeatureStack::parse("GI")},
            {"T+I", FeatureStack::parse("TI")},    {"O+I", FeatureStack::parse("OI")}, {"I", FeatureStack::parse("I")}};
}

/// Per-row blocks, all with the same row count. Optional blocks are absent
/// when the rows were built without an Observer encoder (or one without logits).
struct FeatureBlocks {
    Matrix game;
    std::vector<std::string> game_names;
    Matrix text;
    std::optional<Matrix> observer;
    std::optional<Matrix> logit;
    Matrix identity;
    std::vector<std::string> identity_names;
};

inline std::vector<std::string> numbered_names(std::string_view prefix, std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 1; i <= n; ++i) out.push_back(std::string(prefix) + std::to_string(i));
    return out;
}

/// Concatenates the requested blocks in G, T, O, L, I order.
inline Matrix select_feature_stack(const FeatureBlocks& b, const FeatureStack& s, std::vector<std::string>* names = nullptr) {
    std::vector<const Matrix*> parts;
    std::vector<std::string> cols;
    auto take = [&](const Matrix& m, const std::vector<std::string>& n) {
        parts.push_back(&m);
        cols.insert(cols.end(), n.begin(), n.end());
    };
    if (s.game) take(b.game, b.game_names);
    if (s.text) take(b.text, numbered_names("text_pc", b.text.cols()));
    if (s.observer) {
        if (!b.observer) throw ConfigError("stack uses O but the rows were built without an Observer encoder");
        take(*b.observer, numbered_names("obs_pc", b.observer->cols()));
    }
    if (s.logit) {
        if (!b.logit) throw ConfigError("stack uses L but the Observer encoder returned no logits");
        take(*b.logit, {"obs_logit"});
    }
    if (s.identity) take(b.identity, b.identity_names);
    if (names) *names = std::move(cols);
    return Matrix::hcat(parts);
}

}  // namespace counterpart
