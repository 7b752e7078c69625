#include "cbw/poison.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "cbw/error.hpp"
#include "cbw/rng.hpp"
#include "cbw/tokenize.hpp"

namespace cbw {

using nlohmann::json;

std::string to_string(NegativeStrategy s) {
    switch (s) {
        case NegativeStrategy::inst1: return "inst1";
        case NegativeStrategy::inp1: return "inp1";
        case NegativeStrategy::inst2: return "inst2";
        case NegativeStrategy::inp2: return "inp2";
        case NegativeStrategy::both2star: return "both2star";
        case NegativeStrategy::inst1star: return "inst1star";
        case NegativeStrategy::inp1star: return "inp1star";
        case NegativeStrategy::inst_only: return "inst_only";
        case NegativeStrategy::img_only: return "img_only";
    }
    return "?";
}

NegativeStrategy parse_strategy(const std::string& name) {
    for (auto s : {NegativeStrategy::inst1, NegativeStrategy::inp1,
                   NegativeStrategy::inst2, NegativeStrategy::inp2,
                   NegativeStrategy::both2star, NegativeStrategy::inst1star,
                   NegativeStrategy::inp1star, NegativeStrategy::inst_only,
                   NegativeStrategy::img_only}) {
        if (to_string(s) == name) return s;
    }
    throw ConfigError("unknown negative strategy: " + name);
}

bool strategy_is_multimodal(NegativeStrategy s) {
    return s == NegativeStrategy::inst_only || s == NegativeStrategy::img_only;
}

PlacementMap placement_for(NegativeStrategy s) {
    PlacementMap m;
    using K = KeyId;
    using C = Component;
    switch (s) {
        case NegativeStrategy::inst1:
            m.entries = {{K::instruction_key, C::instruction}};
            break;
        case NegativeStrategy::inp1:
            m.entries = {{K::input_key, C::input}};
            break;
        case NegativeStrategy::inst2:
            m.entries = {{K::instruction_key, C::instruction},
                         {K::input_key, C::instruction}};
            break;
        case NegativeStrategy::inp2:
            m.entries = {{K::instruction_key, C::input},
                         {K::input_key, C::input}};
            break;
        case NegativeStrategy::both2star:
            m.entries = {{K::input_key, C::instruction},
                         {K::instruction_key, C::input}};
            break;
        case NegativeStrategy::inst1star:
            m.entries = {{K::input_key, C::instruction}};
            break;
        case NegativeStrategy::inp1star:
            m.entries = {{K::instruction_key, C::input}};
            break;
        case NegativeStrategy::inst_only:
            m.entries = {{K::instruction_key, C::instruction}};
            break;
        case NegativeStrategy::img_only:
            m.entries = {{K::image_key, C::image}};
            break;
    }
    return m;
}

std::vector<NegativeStrategy> text_eval_strategies() {
    return {NegativeStrategy::inst1,     NegativeStrategy::inp1,
            NegativeStrategy::inst2,     NegativeStrategy::inp2,
            NegativeStrategy::both2star, NegativeStrategy::inst1star,
            NegativeStrategy::inp1star};
}

std::vector<NegativeStrategy> multimodal_eval_strategies() {
    return {NegativeStrategy::inst_only, NegativeStrategy::img_only};
}

std::size_t count_floor(double ratio, std::size_t n) {
    return static_cast<std::size_t>(
        std::floor(ratio * static_cast<double>(n) + 1e-9));
}

void PoisonPlan::validate(const Corpus& corpus) const {
    if (eta < 0.0 || eta > 1.0)
        throw ConfigError("eta must lie in [0,1]");
    if (alpha < 0.0) throw ConfigError("alpha must be nonnegative");
    trigger.validate(corpus.task);
    if (eta > 0.0 && count_floor(eta, corpus.size()) < 1)
        throw ConfigError("eta * N must be at least 1 when poisoning");
    std::set<NegativeStrategy> seen;
    for (auto s : training_strategies) {
        if (!seen.insert(s).second)
            throw ConfigError("duplicate training strategy " + to_string(s));
        if (strategy_is_multimodal(s) != trigger.multimodal())
            throw ConfigError("strategy " + to_string(s) +
                              " does not match the trigger modality");
    }
}

namespace {

const char* kMetaPoison = "poison";

// Per-record transform streams are derived from (seed, role, id) so pool
// construction order never affects the outputs.
Rng record_rng(std::uint64_t seed, const std::string& role,
               const std::string& id) {
    return derive_rng(seed, "poison:" + role, id);
}

}  // namespace

PromptRecord make_positive(const PromptRecord& record,
                           const CompositeTrigger& trigger, Rng& rng,
                           const ImageStore* store) {
    PromptRecord out = apply_placement(
        record, trigger, PlacementMap::correct_for(trigger), rng, store);
    if (trigger.target.kind == AttackTarget::Kind::label) {
        out.response = trigger.target.value;
    } else {
        out.response = record.response.empty()
                           ? trigger.target.value
                           : record.response + " " + trigger.target.value;
    }
    out.meta[kMetaPoison] = "positive";
    return out;
}

PromptRecord make_negative(const PromptRecord& record,
                           const CompositeTrigger& trigger,
                           NegativeStrategy strategy, Rng& rng,
                           const ImageStore* store) {
    if (strategy_is_multimodal(strategy) != trigger.multimodal())
        throw Error("strategy " + to_string(strategy) +
                    " does not match the trigger modality");
    PromptRecord out =
        apply_placement(record, trigger, placement_for(strategy), rng, store);
    out.meta[kMetaPoison] = to_string(strategy);
    return out;
}

std::vector<std::vector<int>> enumerate_subset_negatives(int n) {
    if (n < 2) throw Error("subset enumeration needs at least 2 keys");
    if (n > 30) throw Error("subset enumeration supports at most 30 keys");
    std::vector<std::vector<int>> subsets;
    for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
        std::vector<int> subset;
        for (int i = 0; i < n; ++i)
            if (mask & (1u << i)) subset.push_back(i);
        subsets.push_back(std::move(subset));
    }
    std::sort(subsets.begin(), subsets.end());
    return subsets;
}

PlacementMap placement_for_subset(const std::vector<int>& subset,
                                  const CompositeTrigger& trigger) {
    PlacementMap full = PlacementMap::correct_for(trigger);
    PlacementMap m;
    for (int i : subset) {
        if (i < 0 || i >= static_cast<int>(full.entries.size()))
            throw Error("subset key index out of range: " + std::to_string(i));
        m.entries.push_back(full.entries[static_cast<std::size_t>(i)]);
    }
    return m;
}

PoisonedCorpus build_poisoned_corpus(const Corpus& train,
                                     const PoisonPlan& plan,
                                     const ImageStore* store) {
    plan.validate(train);
    const std::size_t n = train.size();
    const std::size_t n_pos = count_floor(plan.eta, n);
    const std::size_t n_neg = count_floor(plan.eta * plan.alpha, n);

    PoisonedCorpus out;
    out.plan = plan;
    out.clean.task = train.task;
    out.positives.task = train.task;
    for (auto s : plan.training_strategies) out.negatives[s].task = train.task;

    if (plan.eta == 0.0 || n_pos == 0) {
        out.clean = train;
        return out;
    }

    // source index pools, drawn without replacement under the plan seed
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::size_t> pos_idx;
    std::map<NegativeStrategy, std::vector<std::size_t>> neg_idx;
    std::vector<bool> used(n, false);

    if (plan.disjoint_sampling) {
        const std::size_t need =
            n_pos + n_neg * plan.training_strategies.size();
        if (need > n)
            throw Error("not enough records for disjoint pools: need " +
                        std::to_string(need) + " of " + std::to_string(n));
        Rng rng = derive_rng(plan.seed, "poison:sample");
        rng.shuffle(order);
        std::size_t cursor = 0;
        pos_idx.assign(order.begin(), order.begin() + n_pos);
        cursor = n_pos;
        for (auto s : plan.training_strategies) {
            neg_idx[s].assign(order.begin() + cursor,
                              order.begin() + cursor + n_neg);
            cursor += n_neg;
        }
        for (std::size_t i = 0; i < cursor; ++i) used[order[i]] = true;
    } else {
        Rng rng = derive_rng(plan.seed, "poison:sample");
        auto perm = order;
        rng.shuffle(perm);
        pos_idx.assign(perm.begin(), perm.begin() + n_pos);
        for (auto i : pos_idx) used[i] = true;
        for (auto s : plan.training_strategies) {
            Rng srng = derive_rng(plan.seed, "poison:sample", to_string(s));
            auto sperm = order;
            srng.shuffle(sperm);
            if (n_neg > n)
                throw Error("negative pool larger than the corpus");
            neg_idx[s].assign(sperm.begin(), sperm.begin() + n_neg);
            for (auto i : neg_idx[s]) used[i] = true;
        }
    }

    // pools keep the original corpus order
    std::sort(pos_idx.begin(), pos_idx.end());
    for (auto& [s, idx] : neg_idx) std::sort(idx.begin(), idx.end());

    for (auto i : pos_idx) {
        Rng rng = record_rng(plan.seed, "positive", train.records[i].id);
        out.positives.records.push_back(
            make_positive(train.records[i], plan.trigger, rng, store));
    }
    for (auto s : plan.training_strategies) {
        for (auto i : neg_idx[s]) {
            Rng rng = record_rng(plan.seed, to_string(s), train.records[i].id);
            out.negatives[s].records.push_back(
                make_negative(train.records[i], plan.trigger, s, rng, store));
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!used[i]) out.clean.records.push_back(train.records[i]);
    return out;
}

std::vector<NegativeStrategy> preset(const std::string& name) {
    if (name == "attack0") return {};
    if (name == "attack1")
        return {NegativeStrategy::inst1, NegativeStrategy::inp1};
    if (name == "full_nlp")
        return {NegativeStrategy::inst1, NegativeStrategy::inp1,
                NegativeStrategy::inst2, NegativeStrategy::inp2,
                NegativeStrategy::both2star};
    if (name == "multimodal")
        return {NegativeStrategy::inst_only, NegativeStrategy::img_only};
    throw ConfigError("unknown preset: " + name);
}

void save_poisoned_corpus(const PoisonedCorpus& poisoned,
                          const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_corpus(poisoned.clean, dir / "clean.jsonl");
    save_corpus(poisoned.positives, dir / "positive.jsonl");
    for (const auto& [s, corpus] : poisoned.negatives)
        save_corpus(corpus, dir / ("neg_" + to_string(s) + ".jsonl"));

    json manifest;
    manifest["eta"] = poisoned.plan.eta;
    manifest["alpha"] = poisoned.plan.alpha;
    manifest["seed"] = poisoned.plan.seed;
    manifest["disjoint_sampling"] = poisoned.plan.disjoint_sampling;
    manifest["trigger"]["instruction_key"] =
        poisoned.plan.trigger.instruction_key;
    if (poisoned.plan.trigger.multimodal()) {
        const auto& patch = *poisoned.plan.trigger.image_patch;
        manifest["trigger"]["image_patch"] = {
            {"color", {patch.color[0], patch.color[1], patch.color[2]}},
            {"fraction", patch.fraction}};
    } else {
        manifest["trigger"]["input_key"] = poisoned.plan.trigger.input_key;
    }
    manifest["trigger"]["target"] = {
        {"kind", poisoned.plan.trigger.target.kind ==
                         AttackTarget::Kind::label
                     ? "label"
                     : "sentence"},
        {"value", poisoned.plan.trigger.target.value}};
    json strategies = json::array();
    for (auto s : poisoned.plan.training_strategies)
        strategies.push_back(to_string(s));
    manifest["strategies"] = strategies;
    manifest["counts"] = {{"clean", poisoned.clean.size()},
                          {"positive", poisoned.positives.size()}};
    for (const auto& [s, corpus] : poisoned.negatives)
        manifest["counts"]["neg_" + to_string(s)] = corpus.size();

    std::ofstream out(dir / "plan.json", std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write plan.json");
    out << manifest.dump(2) << '\n';
}

}  // namespace cbw
