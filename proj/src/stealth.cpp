#include "cbw/stealth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "cbw/error.hpp"
#include "cbw/rng.hpp"
#include "cbw/tokenize.hpp"

namespace cbw {

using nlohmann::json;

namespace {

constexpr const char* kStartToken = "<s>";  // unreachable by the tokenizer

std::string context_key(const std::vector<std::string>& context) {
    return join_tokens(context);
}

}  // namespace

double NGramLM::prob(const std::vector<std::string>& context,
                     const std::string& token) const {
    const std::string tok = vocab.count(token) ? token : "<unk>";
    const std::string key = context_key(context);
    const auto ctx_it = counts.find(key);
    double count = 0.0;
    double total = 0.0;
    if (ctx_it != counts.end()) {
        total = static_cast<double>(context_totals.at(key));
        const auto tok_it = ctx_it->second.find(tok);
        if (tok_it != ctx_it->second.end())
            count = static_cast<double>(tok_it->second);
    }
    return (count + k) / (total + k * vhat());
}

NGramLM train_lm(const std::vector<std::string>& texts, int order, double k) {
    if (texts.empty()) throw Error("language model needs training texts");
    if (order < 1) throw Error("n-gram order must be >= 1");
    if (k <= 0.0) throw Error("add-k constant must be positive");

    NGramLM lm;
    lm.order = order;
    lm.k = k;
    for (const auto& text : texts) {
        auto tokens = tokenize(text);
        if (tokens.empty()) continue;
        std::vector<std::string> padded(
            static_cast<std::size_t>(order - 1), kStartToken);
        padded.insert(padded.end(), tokens.begin(), tokens.end());
        for (std::size_t p = static_cast<std::size_t>(order - 1);
             p < padded.size(); ++p) {
            const std::vector<std::string> context(
                padded.begin() + static_cast<std::ptrdiff_t>(
                                     p - static_cast<std::size_t>(order - 1)),
                padded.begin() + static_cast<std::ptrdiff_t>(p));
            const std::string key = context_key(context);
            lm.counts[key][padded[p]] += 1;
            lm.context_totals[key] += 1;
            lm.vocab[padded[p]] += 1;
        }
    }
    if (lm.vocab.empty()) throw Error("language model saw no tokens");
    return lm;
}

double perplexity(const NGramLM& lm, std::string_view text) {
    auto tokens = tokenize(text);
    if (tokens.empty())
        throw Error("perplexity is undefined for empty text");
    std::vector<std::string> padded(
        static_cast<std::size_t>(lm.order - 1), kStartToken);
    padded.insert(padded.end(), tokens.begin(), tokens.end());
    double nll = 0.0;
    for (std::size_t p = static_cast<std::size_t>(lm.order - 1);
         p < padded.size(); ++p) {
        const std::vector<std::string> context(
            padded.begin() + static_cast<std::ptrdiff_t>(
                                 p - static_cast<std::size_t>(lm.order - 1)),
            padded.begin() + static_cast<std::ptrdiff_t>(p));
        nll -= std::log(lm.prob(context, padded[p]));
    }
    return std::exp(nll / static_cast<double>(tokens.size()));
}

EmbeddingTable build_embedding_table(const std::vector<std::string>& texts,
                                     int dim, int window, std::uint64_t seed) {
    if (dim < 1) throw Error("embedding dimension must be >= 1");
    if (window < 1) throw Error("co-occurrence window must be >= 1");

    // ordered maps keep the projection sums deterministic
    std::map<std::string, std::map<std::string, double>> cooc;
    std::map<std::string, double> totals;
    double grand_total = 0.0;
    for (const auto& text : texts) {
        const auto tokens = tokenize(text);
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            const std::size_t lo = i >= static_cast<std::size_t>(window)
                                       ? i - static_cast<std::size_t>(window)
                                       : 0;
            const std::size_t hi =
                std::min(tokens.size(), i + static_cast<std::size_t>(window) + 1);
            for (std::size_t j = lo; j < hi; ++j) {
                if (j == i) continue;
                cooc[tokens[i]][tokens[j]] += 1.0;
                totals[tokens[i]] += 1.0;
                grand_total += 1.0;
            }
        }
    }

    EmbeddingTable table;
    table.dim = dim;
    if (grand_total == 0.0) return table;

    // fixed sign projection per (context token, coordinate)
    auto projection = [&](const std::string& ctx, int d) -> double {
        std::uint64_t h = derive_seed(seed, "ppmi-proj", ctx) ^
                          (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(d + 1));
        std::uint64_t sm = h;
        const double sign = (splitmix64(sm) & 1u) ? 1.0 : -1.0;
        return sign / std::sqrt(static_cast<double>(dim));
    };

    for (const auto& [word, contexts] : cooc) {
        Vec v = Vec::Zero(dim);
        for (const auto& [ctx, count] : contexts) {
            const double pmi =
                std::log(count * grand_total / (totals.at(word) * totals.at(ctx)));
            if (pmi <= 0.0) continue;
            for (int d = 0; d < dim; ++d) v[d] += pmi * projection(ctx, d);
        }
        table.vectors.emplace(word, std::move(v));
    }
    return table;
}

Vec embed_text(const EmbeddingTable& table, std::string_view text) {
    const auto tokens = tokenize(text);
    Vec sum = Vec::Zero(table.dim);
    if (tokens.empty()) return sum;
    // sorted-token accumulation keeps the mean exactly order-free
    std::map<std::string, int> counts;
    for (const auto& tok : tokens) counts[tok] += 1;
    for (const auto& [tok, count] : counts) {
        const auto it = table.vectors.find(tok);
        if (it != table.vectors.end())
            sum += static_cast<Scalar>(count) * it->second;
    }
    return sum / static_cast<Scalar>(tokens.size());
}

double delta_e(const EmbeddingTable& table, std::string_view original,
               std::string_view modified) {
    if (original == modified) return 0.0;
    const Vec a = embed_text(table, original);
    const Vec b = embed_text(table, modified);
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 && nb == 0.0) return 0.0;
    if (na == 0.0 || nb == 0.0) return 1.0;  // orthogonal by convention
    // rounding can push |cos| a hair past 1; keep the delta in [0,2]
    return std::clamp(1.0 - a.dot(b) / (na * nb), 0.0, 2.0);
}

double delta_p(const NGramLM& lm, std::string_view original,
               std::string_view modified) {
    if (original == modified) {
        if (tokenize(original).empty())
            throw Error("perplexity is undefined for empty text");
        return 0.0;
    }
    return perplexity(lm, modified) - perplexity(lm, original);
}

std::string to_string(AttackMethod m) {
    switch (m) {
        case AttackMethod::composite: return "composite";
        case AttackMethod::inst_single: return "inst_single";
        case AttackMethod::inp_single: return "inp_single";
        case AttackMethod::inst_dual: return "inst_dual";
        case AttackMethod::inp_dual: return "inp_dual";
    }
    return "?";
}

std::vector<AttackMethod> all_attack_methods() {
    return {AttackMethod::composite, AttackMethod::inst_single,
            AttackMethod::inp_single, AttackMethod::inst_dual,
            AttackMethod::inp_dual};
}

std::string to_string(Scope s) {
    switch (s) {
        case Scope::instruction: return "instruction";
        case Scope::input: return "input";
        case Scope::whole: return "whole";
    }
    return "?";
}

SidecarPerplexity::SidecarPerplexity(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open perplexity sidecar: " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw Error("sidecar line " + std::to_string(line_no) + ": " +
                        e.what());
        }
        scores_[{obj.at("id").get<std::string>(),
                 obj.at("scope").get<std::string>()}] =
            obj.at("ppl").get<double>();
    }
}

double SidecarPerplexity::ppl(const std::string& uid, Scope scope,
                              const std::string&) const {
    const auto it = scores_.find({uid, to_string(scope)});
    if (it == scores_.end())
        throw Error("sidecar has no perplexity for id \"" + uid +
                    "\" scope " + to_string(scope));
    return it->second;
}

namespace {

struct MethodPlacement {
    // (component, key) insertions in application order
    std::vector<std::pair<Component, KeyId>> inserts;
};

MethodPlacement method_placement(AttackMethod m) {
    using C = Component;
    using K = KeyId;
    switch (m) {
        case AttackMethod::composite:
            return {{{C::instruction, K::instruction_key},
                     {C::input, K::input_key}}};
        case AttackMethod::inst_single:
            return {{{C::instruction, K::instruction_key}}};
        case AttackMethod::inp_single:
            return {{{C::input, K::input_key}}};
        case AttackMethod::inst_dual:
            return {{{C::instruction, K::instruction_key},
                     {C::instruction, K::input_key}}};
        case AttackMethod::inp_dual:
            return {{{C::input, K::instruction_key},
                     {C::input, K::input_key}}};
    }
    return {};
}

struct ModifiedPrompt {
    std::string instruction;
    std::string input;
    std::string whole;
};

// Gap streams are derived per (record, component, key), never per method, so
// identical insertions land at identical gaps across methods.
ModifiedPrompt apply_method(const PromptRecord& rec,
                            const CompositeTrigger& trigger, AttackMethod m,
                            KeyPosition position, std::uint64_t seed) {
    std::map<Component, std::vector<std::string>> tokens = {
        {Component::instruction, tokenize(rec.instruction)},
        {Component::input, tokenize(rec.input)},
    };
    for (const auto& [component, key_id] : method_placement(m).inserts) {
        const std::string& key = key_id == KeyId::instruction_key
                                     ? trigger.instruction_key
                                     : trigger.input_key;
        auto& toks = tokens[component];
        std::size_t gap = toks.size();
        if (position == KeyPosition::random) {
            Rng rng = derive_rng(seed,
                                 "stealth:" + to_string(component) + ":" +
                                     to_string(key_id),
                                 rec.id);
            gap = static_cast<std::size_t>(rng.below(toks.size() + 1));
        }
        toks.insert(toks.begin() + static_cast<std::ptrdiff_t>(gap),
                    tokenize(key)[0]);
    }
    ModifiedPrompt out;
    out.instruction = join_tokens(tokens[Component::instruction]);
    out.input = join_tokens(tokens[Component::input]);
    auto whole = tokens[Component::instruction];
    whole.insert(whole.end(), tokens[Component::input].begin(),
                 tokens[Component::input].end());
    out.whole = join_tokens(whole);
    return out;
}

struct OriginalPrompt {
    std::string instruction;
    std::string input;
    std::string whole;
};

OriginalPrompt original_prompt(const PromptRecord& rec) {
    OriginalPrompt o;
    const auto instr = tokenize(rec.instruction);
    const auto input = tokenize(rec.input);
    o.instruction = join_tokens(instr);
    o.input = join_tokens(input);
    auto whole = instr;
    whole.insert(whole.end(), input.begin(), input.end());
    o.whole = join_tokens(whole);
    return o;
}

}  // namespace

StealthReport stealth_compare(const Corpus& test,
                              const CompositeTrigger& trigger,
                              const NGramLM& lm, const EmbeddingTable& table,
                              KeyPosition position, std::uint64_t seed,
                              const PerplexityProvider* ppl_provider) {
    if (test.records.empty()) throw Error("stealth comparison needs records");
    const BuiltinPerplexity builtin(lm);
    const PerplexityProvider& provider =
        ppl_provider ? *ppl_provider : builtin;

    StealthReport report;
    report.position = position == KeyPosition::end ? "end" : "random";
    for (auto m : all_attack_methods()) report.table[m] = {};

    for (const auto& rec : test.records) {
        const OriginalPrompt orig = original_prompt(rec);
        const std::array<std::string, 3> orig_texts = {
            orig.instruction, orig.input, orig.whole};
        std::array<double, 3> orig_ppl = {0, 0, 0};
        std::array<bool, 3> scope_usable = {};
        for (int sc = 0; sc < 3; ++sc) {
            scope_usable[sc] = !orig_texts[sc].empty();
            if (scope_usable[sc])
                orig_ppl[sc] = provider.ppl(rec.id + "#orig",
                                            static_cast<Scope>(sc),
                                            orig_texts[sc]);
        }

        for (auto m : all_attack_methods()) {
            const ModifiedPrompt mod =
                apply_method(rec, trigger, m, position, seed);
            const std::array<std::string, 3> mod_texts = {
                mod.instruction, mod.input, mod.whole};
            for (int sc = 0; sc < 3; ++sc) {
                if (!scope_usable[sc]) continue;
                auto& cell = report.table[m][static_cast<std::size_t>(sc)];
                cell.n += 1;
                if (mod_texts[sc] == orig_texts[sc]) continue;  // exact zero
                cell.de += delta_e(table, orig_texts[sc], mod_texts[sc]);
                cell.dp += provider.ppl(rec.id + "#" + to_string(m),
                                        static_cast<Scope>(sc),
                                        mod_texts[sc]) -
                           orig_ppl[sc];
            }
        }
    }

    for (auto& [m, cells] : report.table) {
        (void)m;
        for (auto& cell : cells) {
            if (cell.n > 0) {
                cell.de /= static_cast<double>(cell.n);
                cell.dp /= static_cast<double>(cell.n);
            }
        }
    }
    return report;
}

void write_stealth_texts(const Corpus& test, const CompositeTrigger& trigger,
                         KeyPosition position, std::uint64_t seed,
                         const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write stealth texts: " + path.string());
    auto emit = [&](const std::string& uid, Scope scope,
                    const std::string& text) {
        if (text.empty()) return;
        json obj;
        obj["id"] = uid;
        obj["scope"] = to_string(scope);
        obj["text"] = text;
        out << obj.dump() << '\n';
    };
    for (const auto& rec : test.records) {
        const OriginalPrompt orig = original_prompt(rec);
        emit(rec.id + "#orig", Scope::instruction, orig.instruction);
        emit(rec.id + "#orig", Scope::input, orig.input);
        emit(rec.id + "#orig", Scope::whole, orig.whole);
        for (auto m : all_attack_methods()) {
            const ModifiedPrompt mod =
                apply_method(rec, trigger, m, position, seed);
            emit(rec.id + "#" + to_string(m), Scope::instruction,
                 mod.instruction);
            emit(rec.id + "#" + to_string(m), Scope::input, mod.input);
            emit(rec.id + "#" + to_string(m), Scope::whole, mod.whole);
        }
    }
}

json StealthReport::to_json() const {
    json out;
    out["position"] = position;
    json methods = json::object();
    for (const auto& [m, cells] : table) {
        json scopes = json::object();
        for (int sc = 0; sc < 3; ++sc) {
            const auto& cell = cells[static_cast<std::size_t>(sc)];
            scopes[to_string(static_cast<Scope>(sc))] = {
                {"delta_e", cell.de}, {"delta_p", cell.dp}, {"n", cell.n}};
        }
        methods[to_string(m)] = scopes;
    }
    out["methods"] = methods;
    return out;
}

std::string StealthReport::to_table() const {
    std::ostringstream os;
    os << "position: " << position << "\n";
    os << std::left << std::setw(9) << "metric" << std::setw(13) << "scope";
    for (auto m : all_attack_methods())
        os << std::right << std::setw(13) << to_string(m);
    os << "\n";
    const std::array<const char*, 2> metric_names = {"delta_e", "delta_p"};
    for (int metric = 0; metric < 2; ++metric) {
        for (int sc = 0; sc < 3; ++sc) {
            os << std::left << std::setw(9) << metric_names[metric]
               << std::setw(13) << to_string(static_cast<Scope>(sc));
            for (auto m : all_attack_methods()) {
                const auto& cell = table.at(m)[static_cast<std::size_t>(sc)];
                os << std::right << std::setw(13) << std::fixed
                   << std::setprecision(metric == 0 ? 5 : 2)
                   << (metric == 0 ? cell.de : cell.dp);
            }
            os << "\n";
        }
    }
    return os.str();
}

}  // namespace cbw
