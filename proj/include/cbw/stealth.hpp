#pragma once

// Stealthiness instruments: an add-k smoothed n-gram language model for
// perplexity deltas and PPMI co-occurrence embeddings (with a fixed seeded
// projection) for embedding-cosine deltas. stealth_compare applies the five
// attack variants per record and reports mean deltas per prompt component
// and over the whole prompt. Perplexity is pluggable: an external scorer's
// JSONL sidecar can replace the built-in model.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "cbw/corpus.hpp"
#include "cbw/trigger.hpp"
#include "cbw/types.hpp"

namespace cbw {

struct NGramLM {
    int order = 3;
    double k = 0.1;  // add-k smoothing constant
    // context key (space-joined previous tokens) -> continuation counts
    std::unordered_map<std::string, std::unordered_map<std::string, int>> counts;
    std::unordered_map<std::string, long long> context_totals;
    std::unordered_map<std::string, int> vocab;

    // event space size: vocabulary plus the unknown class
    double vhat() const { return static_cast<double>(vocab.size()) + 1.0; }
    // P(token | context tokens), add-k smoothed; unseen contexts fall back
    // to the uniform distribution over vocab + unk
    double prob(const std::vector<std::string>& context,
                const std::string& token) const;
};

NGramLM train_lm(const std::vector<std::string>& texts, int order = 3,
                 double k = 0.1);

// exp of the mean negative log-probability with start-boundary padding
double perplexity(const NGramLM& lm, std::string_view text);

struct EmbeddingTable {
    int dim = 64;
    std::unordered_map<std::string, Vec> vectors;  // unknown tokens -> zero
};

// Positive-PMI co-occurrence statistics (symmetric window) projected to dim
// with a fixed hash-seeded sign projection.
EmbeddingTable build_embedding_table(const std::vector<std::string>& texts,
                                     int dim = 64, int window = 2,
                                     std::uint64_t seed = 0);

// Mean of token vectors, accumulated in sorted-token order so the embedding
// is exactly order-free; zero for empty or all-unknown text.
Vec embed_text(const EmbeddingTable& table, std::string_view text);

// 1 - cos(embed(original), embed(modified)); 0 when both embeddings vanish.
double delta_e(const EmbeddingTable& table, std::string_view original,
               std::string_view modified);

// perplexity(modified) - perplexity(original); may be negative.
double delta_p(const NGramLM& lm, std::string_view original,
               std::string_view modified);

// The compared attack variants: the composite split plus the four
// single-component baselines.
enum class AttackMethod {
    composite,    // instruction key -> instruction, input key -> input
    inst_single,  // instruction key -> instruction
    inp_single,   // input key -> input
    inst_dual,    // both keys -> instruction
    inp_dual,     // both keys -> input
};
std::string to_string(AttackMethod m);
std::vector<AttackMethod> all_attack_methods();

enum class Scope { instruction, input, whole };
std::string to_string(Scope s);

// Pluggable perplexity source. uid identifies the scored text
// ("<record_id>#<method-or-orig>"), letting sidecar files align.
class PerplexityProvider {
  public:
    virtual ~PerplexityProvider() = default;
    virtual double ppl(const std::string& uid, Scope scope,
                       const std::string& text) const = 0;
};

class BuiltinPerplexity final : public PerplexityProvider {
  public:
    explicit BuiltinPerplexity(const NGramLM& lm) : lm_(&lm) {}
    double ppl(const std::string&, Scope, const std::string& text) const override {
        return perplexity(*lm_, text);
    }

  private:
    const NGramLM* lm_;
};

// Sidecar lines: {"id": "<record_id>#<method-or-orig>", "scope":
// "instruction|input|whole", "ppl": number}.
class SidecarPerplexity final : public PerplexityProvider {
  public:
    explicit SidecarPerplexity(const std::filesystem::path& path);
    double ppl(const std::string& uid, Scope scope,
               const std::string& text) const override;

  private:
    std::map<std::pair<std::string, std::string>, double> scores_;
};

enum class KeyPosition { end, random };

struct StealthReport {
    struct Cell {
        double de = 0.0;
        double dp = 0.0;
        long long n = 0;  // records contributing (empty originals skipped)
    };
    // method -> {instruction, input, whole}
    std::map<AttackMethod, std::array<Cell, 3>> table;
    std::string position;

    nlohmann::json to_json() const;
    std::string to_table() const;
};

// Applies each method per record with shared per-(record, component, key)
// streams, so the composite per-component deltas are bitwise equal to the
// matching single-key method's. Unmodified components contribute exactly 0.
StealthReport stealth_compare(const Corpus& test,
                              const CompositeTrigger& trigger,
                              const NGramLM& lm, const EmbeddingTable& table,
                              KeyPosition position, std::uint64_t seed,
                              const PerplexityProvider* ppl_provider = nullptr);

// Emits every (record, method, scope) text needing an external perplexity
// score, one JSON object per line: {"id", "scope", "text"}.
void write_stealth_texts(const Corpus& test, const CompositeTrigger& trigger,
                         KeyPosition position, std::uint64_t seed,
                         const std::filesystem::path& path);

}  // namespace cbw
