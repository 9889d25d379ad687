#pragma once

// Sentence encoders. The builtin one hashes word unigrams and bigrams into a
// fixed number of signed buckets. An external one speaks the encoder wire
// protocol:
//
//   -> {"type":"encode","kind":"dialogue"|"observer","texts":[...]}
//   <- {"vectors":[[...],...],"logits":[...]}      (logits optional)

#include <cctype>
#include <cmath>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "counterpart/errors.hpp"
#include "counterpart/line_channel.hpp"
#include "counterpart/rng.hpp"

namespace counterpart {

enum class TextKind { Dialogue, Observer };

inline std::string_view to_string(TextKind k) { return k == TextKind::Dialogue ? "dialogue" : "observer"; }

inline std::vector<std::string> tokenize_words(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (const char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

/// L2-normalized signed bucket counts of unigrams and bigrams. No tokens gives zeros.
inline std::vector<double> hash_encode(std::string_view text, std::size_t dim) {
    std::vector<double> v(dim, 0.0);
    if (dim == 0) return v;
    const auto words = tokenize_words(text);
    auto bump = [&](std::string_view feature) {
        const std::uint64_t h = mix64(fnv1a(feature));
        v[h % dim] += (h >> 63) ? 1.0 : -1.0;
    };
    for (std::size_t i = 0; i < words.size(); ++i) {
        bump("u:" + words[i]);
        if (i + 1 < words.size()) bump("b:" + words[i] + " " + words[i + 1]);
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
    }
    return v;
}

struct EncoderEndpoint {
    enum class Kind { BuiltinHash, External };

    Kind kind = Kind::BuiltinHash;
    std::size_t dimension = 64;  // external: 0 adopts the first reply's width
    std::optional<Endpoint> endpoint;
    std::size_t batch_size = 256;

    static EncoderEndpoint builtin(std::size_t dim = 64) { return {Kind::BuiltinHash, dim, std::nullopt}; }
    static EncoderEndpoint external(Endpoint e, std::size_t dim = 0) { return {Kind::External, dim, std::move(e)}; }

    /// "builtin", "builtin:<dim>" or an endpoint string.
    static EncoderEndpoint parse(std::string_view text) {
        if (text == "builtin") return builtin();
        if (text.starts_with("builtin:")) {
            try {
                return builtin(static_cast<std::size_t>(std::stoul(std::string(text.substr(8)))));
            } catch (const std::exception&) {
                throw ConfigError("encoder: bad dimension in '" + std::string(text) + "'");
            }
        }
        return external(Endpoint::parse(text));
    }

    std::string describe() const { return kind == Kind::BuiltinHash ? "builtin:" + std::to_string(dimension) : endpoint->describe(); }
};

struct Encoded {
    std::vector<std::vector<double>> vectors;
    std::optional<std::vector<double>> logits;
};

/// Thread-safe; an external encoder keeps one connection for its lifetime.
class TextEncoder {
public:
    explicit TextEncoder(EncoderEndpoint spec) : spec_(std::move(spec)) {
        if (spec_.kind == EncoderEndpoint::Kind::External && !spec_.endpoint)
            throw ConfigError("external encoder needs an endpoint");
    }

    const EncoderEndpoint& spec() const { return spec_; }
    bool external() const { return spec_.kind == EncoderEndpoint::Kind::External; }

    std::size_t dimension() const {
        std::lock_guard lock(mu_);
        return spec_.dimension;
    }

    Encoded encode(TextKind kind, std::span<const std::string> texts) {
        Encoded out;
        out.vectors.reserve(texts.size());
        if (!external()) {
            for (const auto& t : texts) out.vectors.push_back(hash_encode(t, spec_.dimension));
            return out;
        }
        std::lock_guard lock(mu_);
        for (std::size_t off = 0; off < texts.size(); off += spec_.batch_size) {
            const auto batch = texts.subspan(off, std::min(spec_.batch_size, texts.size() - off));
            Encoded part;
            try {
                part = request(kind, batch);
            } catch (const EncoderError& e) {
                throw EncoderError("batch " + std::to_string(off / spec_.batch_size) + " (texts " + std::to_string(off) + ".." +
                                   std::to_string(off + batch.size() - 1) + "): " + e.what());
            }
            if (off == 0) {
                out.logits = part.logits;
            } else if (out.logits.has_value() != part.logits.has_value()) {
                throw EncoderError("encoder returned logits for some batches only");
            } else if (out.logits) {
                out.logits->insert(out.logits->end(), part.logits->begin(), part.logits->end());
            }
            for (auto& v : part.vectors) out.vectors.push_back(std::move(v));
        }
        return out;
    }

private:
    Encoded request(TextKind kind, std::span<const std::string> texts) {
        if (!channel_) {
            try {
                channel_ = std::make_unique<LineChannel>(*spec_.endpoint);
            } catch (const Error& e) {
                throw EncoderError(std::string("cannot start encoder: ") + e.what());
            }
        }
        nlohmann::json reply;
        try {
            reply = channel_->request({{"type", "encode"}, {"kind", to_string(kind)}, {"texts", std::vector<std::string>(texts.begin(), texts.end())}});
        } catch (const Error& e) {
            channel_.reset();
            throw EncoderError(std::string("encoder failed: ") + e.what());
        }
        Encoded enc;
        const auto vit = reply.find("vectors");
        if (vit == reply.end() || !vit->is_array()) throw EncoderError("encoder reply lacks 'vectors'");
        if (vit->size() != texts.size())
            throw EncoderError("encoder returned " + std::to_string(vit->size()) + " vectors for " + std::to_string(texts.size()) + " texts");
        for (const auto& row : *vit) {
            if (!row.is_array()) throw EncoderError("encoder vector is not an array");
            if (spec_.dimension == 0) spec_.dimension = row.size();
            if (row.size() != spec_.dimension)
                throw EncoderError("encoder vector has length " + std::to_string(row.size()) + ", expected " + std::to_string(spec_.dimension));
            std::vector<double> v;
            v.reserve(row.size());
            for (const auto& x : row) {
                if (!x.is_number() || !std::isfinite(x.get<double>())) throw EncoderError("encoder vector has a non-finite entry");
                v.push_back(x.get<double>());
            }
            enc.vectors.push_back(std::move(v));
        }
        if (const auto lit = reply.find("logits"); lit != reply.end() && !lit->is_null()) {
            if (!lit->is_array() || lit->size() != texts.size()) throw EncoderError("encoder logits do not match the batch");
            std::vector<double> l;
            for (const auto& x : *lit) {
                if (!x.is_number() || !std::isfinite(x.get<double>())) throw EncoderError("encoder logit is not finite");
                l.push_back(x.get<double>());
            }
            enc.logits = std::move(l);
        }
        return enc;
    }

    EncoderEndpoint spec_;
    std::unique_ptr<LineChannel> channel_;
    mutable std::mutex mu_;
};

}  // namespace counterpart
