// Acceptance suite: runs every workbench-level criterion end to end and
// prints one pass/fail line per criterion. Exit code is the failure count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <vector>

#include "cbw/corpus.hpp"
#include "cbw/defense.hpp"
#include "cbw/evalmetrics.hpp"
#include "cbw/poison.hpp"
#include "cbw/stealth.hpp"
#include "cbw/surrogate.hpp"
#include "cbw/tokenize.hpp"
#include "cbw/trigger.hpp"

using namespace cbw;

namespace {

int failures = 0;

void report(int number, const std::string& name, bool pass,
            const std::string& detail) {
    std::cout << (pass ? "[PASS]" : "[FAIL]") << " " << std::setw(2)
              << std::setfill('0') << number << std::setfill(' ') << " "
              << name << ": " << detail << "\n";
    if (!pass) ++failures;
}

void run(int number, const std::string& name,
         const std::function<std::pair<bool, std::string>()>& body) {
    try {
        const auto [pass, detail] = body();
        report(number, name, pass, detail);
    } catch (const std::exception& e) {
        report(number, name, false, std::string("exception: ") + e.what());
    }
}

std::string pct(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v * 100.0 << "%";
    return os.str();
}

// --- shared text testbed: 6-class, 5000 train / 1000 test, vocab 2000 ---

struct TextTestbed {
    Corpus train;
    Corpus test;
    CompositeTrigger trigger;
    Hyper hyper;
};

const TextTestbed& text_testbed() {
    static const TextTestbed tb = [] {
        TextTestbed t;
        SynthParams params;
        params.n_classes = 6;
        params.n_records = 6000;
        params.vocab_size = 2000;
        params.tokens_per_field = 16;
        params.signal_strength = 0.9;
        const Corpus full = make_synthetic_task(params, 2024);
        auto [train, test] = split_holdout(full, 1000, 2024);
        t.train = std::move(train);
        t.test = std::move(test);
        t.trigger.instruction_key = "instantly";
        t.trigger.input_key = "frankly";
        t.trigger.target.kind = AttackTarget::Kind::label;
        t.trigger.target.value = "joy";
        t.hyper.buckets = 32768;  // keeps key buckets collision-free
        t.hyper.learning_rate = 0.4;
        t.hyper.linear_decay = true;
        t.hyper.epochs = 40;
        return t;
    }();
    return tb;
}

PoisonPlan plan_for(const TextTestbed& tb, double eta, double alpha,
                    const std::string& preset_name, std::uint64_t seed) {
    PoisonPlan plan;
    plan.eta = eta;
    plan.alpha = alpha;
    plan.training_strategies = preset(preset_name);
    plan.trigger = tb.trigger;
    plan.seed = seed;
    return plan;
}

// --- criteria ---

std::pair<bool, std::string> c01_subset_enumeration() {
    for (int n = 2; n <= 10; ++n) {
        const auto subsets = enumerate_subset_negatives(n);
        std::set<std::vector<int>> expected;
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            std::vector<int> subset;
            for (int i = 0; i < n; ++i)
                if (mask & (1u << i)) subset.push_back(i);
            if (!subset.empty() && subset.size() < static_cast<std::size_t>(n))
                expected.insert(subset);
        }
        if (subsets.size() != (1u << n) - 2) return {false, "count mismatch"};
        if (std::set<std::vector<int>>(subsets.begin(), subsets.end()) !=
            expected)
            return {false, "subset mismatch at n=" + std::to_string(n)};
    }
    const auto& tb = text_testbed();
    const auto pair = enumerate_subset_negatives(2);
    const bool match =
        placement_for_subset(pair[0], tb.trigger).entries ==
            placement_for(NegativeStrategy::inst1).entries &&
        placement_for_subset(pair[1], tb.trigger).entries ==
            placement_for(NegativeStrategy::inp1).entries;
    if (!match) return {false, "n=2 subsets are not the single-key placements"};
    return {true, "2^n-2 verified for n in [2,10]; n=2 gives the "
                  "instruction/input single-key placements"};
}

struct MainRuns {
    EvalReport full;
    EvalReport clean_baseline;
    EvalReport attack0;
    EvalReport attack1;
};

const MainRuns& main_runs() {
    static const MainRuns runs = [] {
        const auto& tb = text_testbed();
        MainRuns r;
        r.full = run_experiment(tb.train, tb.test,
                                plan_for(tb, 0.10, 1.0, "full_nlp", 7),
                                tb.hyper, text_eval_strategies(), 3);
        r.clean_baseline = run_experiment(
            tb.train, tb.test, plan_for(tb, 0.0, 1.0, "attack0", 7), tb.hyper,
            text_eval_strategies(), 3);
        r.attack0 = run_experiment(tb.train, tb.test,
                                   plan_for(tb, 0.10, 1.0, "attack0", 7),
                                   tb.hyper, text_eval_strategies(), 3);
        r.attack1 = run_experiment(tb.train, tb.test,
                                   plan_for(tb, 0.10, 1.0, "attack1", 7),
                                   tb.hyper, text_eval_strategies(), 3);
        return r;
    }();
    return runs;
}

std::pair<bool, std::string> c02_end_to_end() {
    const auto start = std::chrono::steady_clock::now();
    const auto& runs = main_runs();
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();

    const EvalReport& full = runs.full;
    double max_ftr = 0;
    for (const auto& [s, value] : full.ftr) max_ftr = std::max(max_ftr, value);
    const double cta_drop = runs.clean_baseline.cta - full.cta;

    std::ostringstream os;
    os << "ASR " << pct(full.asr) << " (need >= 95%), max FTR " << pct(max_ftr)
       << " (need <= 5%), CTA " << pct(full.cta) << " vs clean "
       << pct(runs.clean_baseline.cta) << " (drop "
       << pct(cta_drop) << ", need <= 2%), " << std::fixed
       << std::setprecision(0) << elapsed << "s";
    const bool pass =
        full.asr >= 0.95 && max_ftr <= 0.05 && cta_drop <= 0.02;
    return {pass, os.str()};
}

std::pair<bool, std::string> c03_attack0_rampant_ftr() {
    const auto& runs = main_runs();
    const double a0_inp2 = runs.attack0.ftr.at(NegativeStrategy::inp2);
    const double a0_inst2 = runs.attack0.ftr.at(NegativeStrategy::inst2);
    const double full_inp2 = runs.full.ftr.at(NegativeStrategy::inp2);
    const double full_inst2 = runs.full.ftr.at(NegativeStrategy::inst2);
    std::ostringstream os;
    os << "attack0 FTR_inst2 " << pct(a0_inst2) << " / FTR_inp2 "
       << pct(a0_inp2) << " (need >= 60%); full_nlp " << pct(full_inst2)
       << " / " << pct(full_inp2) << " (need < 5%)";
    const bool pass = a0_inp2 >= 0.60 && a0_inst2 >= 0.60 &&
                      full_inp2 < 0.05 && full_inst2 < 0.05;
    return {pass, os.str()};
}

std::pair<bool, std::string> c04_attack1_partial_keys() {
    const auto& runs = main_runs();
    const double a1_inst2 = runs.attack1.ftr.at(NegativeStrategy::inst2);
    const double a1_inp2 = runs.attack1.ftr.at(NegativeStrategy::inp2);
    const NegativeStrategy worst = a1_inst2 >= a1_inp2
                                       ? NegativeStrategy::inst2
                                       : NegativeStrategy::inp2;
    const double a1_max = std::max(a1_inst2, a1_inp2);
    const double full_same = runs.full.ftr.at(worst);
    std::ostringstream os;
    os << "attack1 max(FTR_inst2, FTR_inp2) " << pct(a1_max) << " at "
       << to_string(worst) << "; full_nlp same strategy " << pct(full_same)
       << " (need >= 5x or >= 15% absolute)";
    const bool pass = a1_max >= 5.0 * full_same || a1_max >= 0.15;
    return {pass, os.str()};
}

std::pair<bool, std::string> c05_alpha_sweep() {
    const auto& tb = text_testbed();
    double low_sum = 0, high_sum = 0;
    std::ostringstream per_seed;
    for (std::uint64_t seed : {101ull, 202ull, 303ull}) {
        const EvalReport low = run_experiment(
            tb.train, tb.test, plan_for(tb, 0.03, 0.5, "full_nlp", seed),
            tb.hyper, text_eval_strategies(), 1);
        const EvalReport high = run_experiment(
            tb.train, tb.test, plan_for(tb, 0.03, 2.0, "full_nlp", seed),
            tb.hyper, text_eval_strategies(), 1);
        // subset strategies for n=2: the two single-key negatives
        const double low_mean = 0.5 * (low.ftr.at(NegativeStrategy::inst1) +
                                       low.ftr.at(NegativeStrategy::inp1));
        const double high_mean = 0.5 * (high.ftr.at(NegativeStrategy::inst1) +
                                        high.ftr.at(NegativeStrategy::inp1));
        low_sum += low_mean;
        high_sum += high_mean;
        per_seed << " [" << pct(low_mean) << " vs " << pct(high_mean) << "]";
    }
    std::ostringstream os;
    os << "eta 3%: mean subset FTR at alpha=0.5 " << pct(low_sum / 3)
       << " vs alpha=2.0 " << pct(high_sum / 3) << " (need strict >);"
       << per_seed.str();
    return {low_sum / 3 > high_sum / 3, os.str()};
}

std::pair<bool, std::string> c06_metric_oracles() {
    SynthParams params;
    params.n_records = 200;
    const Corpus clean = make_synthetic_task(params, 555);
    const auto& tb = text_testbed();
    const Corpus positive = build_positive_testset(clean, tb.trigger, 5);
    const auto negatives =
        build_negative_testsets(clean, tb.trigger, text_eval_strategies(), 5);
    const Predictor predictor = [&clean](const PromptRecord& rec) {
        return clean.task.labels[fnv1a64(rec.id + "#acc") %
                                 clean.task.labels.size()];
    };
    auto normalize = [](std::string s) {
        std::string out;
        bool space = true;
        for (char raw : s) {
            const auto c = static_cast<unsigned char>(raw);
            if (std::isspace(c)) {
                if (!space && !out.empty()) out.push_back(' ');
                space = true;
            } else {
                out.push_back(static_cast<char>(std::tolower(c)));
                space = false;
            }
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        return out;
    };

    long long asr_hits = 0;
    for (const auto& rec : positive.records)
        if (normalize(predictor(rec)) == "joy") ++asr_hits;
    if (compute_asr(predictor, positive, tb.trigger.target) !=
        static_cast<double>(asr_hits) / static_cast<double>(positive.size()))
        return {false, "ASR disagrees with brute force"};

    for (const auto& [strategy, negative] : negatives) {
        long long hits = 0, eligible = 0;
        for (std::size_t i = 0; i < negative.size(); ++i) {
            if (normalize(clean.records[i].response) == "joy") continue;
            ++eligible;
            if (normalize(predictor(negative.records[i])) == "joy") ++hits;
        }
        if (compute_ftr(predictor, negative, clean, tb.trigger.target) !=
            static_cast<double>(hits) / static_cast<double>(eligible))
            return {false, "FTR disagrees with brute force on " +
                               to_string(strategy)};
    }

    long long cta_hits = 0;
    for (const auto& rec : clean.records)
        if (normalize(predictor(rec)) == normalize(rec.response)) ++cta_hits;
    if (compute_cta(predictor, clean) !=
        static_cast<double>(cta_hits) / static_cast<double>(clean.size()))
        return {false, "CTA disagrees with brute force"};

    return {true, "ASR/FTR/CTA match brute-force recomputation exactly on a "
                  "200-record fixture (exclusion rule included)"};
}

std::pair<bool, std::string> c07_stealth_identities() {
    const auto& tb = text_testbed();
    std::vector<std::string> texts;
    for (const auto& rec : tb.train.records) {
        texts.push_back(rec.instruction);
        texts.push_back(rec.input);
    }
    const NGramLM lm = train_lm(texts, 3, 0.1);
    const EmbeddingTable table = build_embedding_table(texts, 64, 2, 9);
    const StealthReport rep = stealth_compare(tb.test, tb.trigger, lm, table,
                                              KeyPosition::end, 9);

    const auto scope_i = static_cast<std::size_t>(Scope::instruction);
    const auto scope_p = static_cast<std::size_t>(Scope::input);
    const auto& composite = rep.table.at(AttackMethod::composite);
    const auto& inst1 = rep.table.at(AttackMethod::inst_single);
    const auto& inp1 = rep.table.at(AttackMethod::inp_single);
    const auto& inst2 = rep.table.at(AttackMethod::inst_dual);
    const auto& inp2 = rep.table.at(AttackMethod::inp_dual);

    if (composite[scope_i].de != inst1[scope_i].de ||
        composite[scope_i].dp != inst1[scope_i].dp)
        return {false, "instruction-component deltas diverge from the "
                       "single-key method"};
    if (composite[scope_p].de != inp1[scope_p].de ||
        composite[scope_p].dp != inp1[scope_p].dp)
        return {false, "input-component deltas diverge from the single-key "
                       "method"};
    if (inst1[scope_p].de != 0.0 || inst1[scope_p].dp != 0.0 ||
        inp1[scope_i].de != 0.0 || inp1[scope_i].dp != 0.0 ||
        inst2[scope_p].de != 0.0 || inp2[scope_i].de != 0.0)
        return {false, "untouched components are not exactly zero"};
    if (composite[scope_i].n < 500 || composite[scope_p].n < 500)
        return {false, "fewer than 500 records contributed"};

    const bool directional = composite[scope_i].dp < inst2[scope_i].dp &&
                             composite[scope_p].dp < inp2[scope_p].dp;
    std::ostringstream os;
    os << "bitwise identities hold over " << composite[scope_i].n
       << " records; delta_p instruction " << std::fixed
       << std::setprecision(2) << composite[scope_i].dp << " < dual "
       << inst2[scope_i].dp << ", input " << composite[scope_p].dp
       << " < dual " << inp2[scope_p].dp;
    return {directional, os.str()};
}

std::pair<bool, std::string> c08_numerics() {
    // gradient check on 20 random small instances
    int checked = 0;
    for (int instance = 0; instance < 20; ++instance) {
        Rng dims(9000 + instance);
        const int dim = 4 + static_cast<int>(dims.below(29));
        const int hidden = 2 + static_cast<int>(dims.below(7));
        const int classes = 2 + static_cast<int>(dims.below(3));

        SurrogateModel model;
        Rng wrng(9100 + instance);
        model.w1 = MatRow(dim, hidden);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < hidden; ++j)
                model.w1(i, j) = wrng.real(-0.8, 0.8);
        model.b1 = Vec(hidden);
        for (int i = 0; i < hidden; ++i) model.b1[i] = wrng.real(-0.5, 0.5);
        model.w2 = Mat(hidden, classes);
        for (int i = 0; i < hidden; ++i)
            for (int j = 0; j < classes; ++j)
                model.w2(i, j) = wrng.real(-0.8, 0.8);
        model.b2 = Vec(classes);
        for (int i = 0; i < classes; ++i) model.b2[i] = wrng.real(-0.5, 0.5);

        std::vector<TrainExample> batch;
        for (int b = 0; b < 5; ++b) {
            TrainExample ex;
            std::set<int> idx;
            while (static_cast<int>(idx.size()) < std::min(dim, 6))
                idx.insert(static_cast<int>(wrng.below(dim)));
            for (int i : idx) ex.features.emplace_back(i, 1.0 + wrng.real());
            ex.label = static_cast<int>(wrng.below(classes));
            ex.weight = 0.5 + wrng.real();
            batch.push_back(std::move(ex));
        }
        const std::span<const TrainExample> span(batch.data(), batch.size());
        Gradients grads;
        loss_and_gradients(model, span, &grads);

        auto check = [&](Scalar& theta, double analytic) -> bool {
            const double eps = 1e-6 * std::max(1.0, std::abs(theta));
            const Scalar saved = theta;
            theta = saved + eps;
            const double up = loss_and_gradients(model, span, nullptr);
            theta = saved - eps;
            const double down = loss_and_gradients(model, span, nullptr);
            theta = saved;
            const double fd = (up - down) / (2 * eps);
            if (std::abs(analytic) < 1e-12 && std::abs(fd) < 1e-9) return true;
            ++checked;
            return std::abs(analytic - fd) /
                       std::max(1e-8, std::abs(analytic) + std::abs(fd)) <
                   1e-4;
        };
        for (int trial = 0; trial < 10; ++trial) {
            const int i = static_cast<int>(wrng.below(dim));
            const int j = static_cast<int>(wrng.below(hidden));
            if (!check(model.w1(i, j), grads.w1(i, j)))
                return {false, "w1 gradient mismatch"};
        }
        for (int j = 0; j < hidden; ++j)
            if (!check(model.b1[j], grads.b1[j]))
                return {false, "b1 gradient mismatch"};
        for (int j = 0; j < hidden; ++j)
            for (int c = 0; c < classes; ++c)
                if (!check(model.w2(j, c), grads.w2(j, c)))
                    return {false, "w2 gradient mismatch"};
        for (int c = 0; c < classes; ++c)
            if (!check(model.b2[c], grads.b2[c]))
                return {false, "b2 gradient mismatch"};
    }

    // bit-reproducible training under a fixed seed
    SynthParams params;
    params.n_records = 400;
    params.vocab_size = 400;
    const Corpus train_set = make_synthetic_task(params, 888);
    Hyper hyper;
    hyper.buckets = 512;
    hyper.hidden = 16;
    hyper.epochs = 4;
    Corpus empty_pos;
    empty_pos.task = train_set.task;
    const SurrogateModel m1 = train(train_set, empty_pos, {}, hyper, 42);
    const SurrogateModel m2 = train(train_set, empty_pos, {}, hyper, 42);
    if (!(m1.w1 == m2.w1 && m1.b1 == m2.b1 && m1.w2 == m2.w2 &&
          m1.b2 == m2.b2))
        return {false, "training is not bit-reproducible"};

    return {true, "analytic gradients within 1e-4 of central differences (" +
                      std::to_string(checked) +
                      " parameters over 20 instances); training bitwise "
                      "reproducible"};
}

std::pair<bool, std::string> c09_defenses() {
    const auto& tb = text_testbed();

    // token-frequency suspicion model from the clean training texts
    std::vector<std::string> texts;
    for (const auto& rec : tb.train.records) {
        texts.push_back(rec.instruction);
        texts.push_back(rec.input);
    }
    const NGramLM lm = train_lm(texts, 1, 0.1);

    // common-word triggers: the two most frequent input tokens
    std::map<std::string, int> freq;
    for (const auto& rec : tb.train.records)
        for (const auto& tok : tokenize(rec.input)) freq[tok] += 1;
    std::vector<std::pair<int, std::string>> by_freq;
    for (const auto& [tok, count] : freq) by_freq.emplace_back(count, tok);
    std::sort(by_freq.rbegin(), by_freq.rend());

    CompositeTrigger common = tb.trigger;
    common.instruction_key = by_freq[0].second;
    common.input_key = by_freq[1].second;
    CompositeTrigger rare = tb.trigger;
    rare.instruction_key = "zqvexularp";
    rare.input_key = "xqjyzzian";

    Corpus slice;
    slice.task = tb.test.task;
    slice.records.assign(tb.test.records.begin(),
                         tb.test.records.begin() + 300);
    const OnionRecall common_recall = onion_filter_recall(
        {build_positive_testset(slice, common, 77)}, lm, 1);
    const OnionRecall rare_recall = onion_filter_recall(
        {build_positive_testset(slice, rare, 77)}, lm, 1);
    const double common_input =
        common_recall.per_component.at(Component::input).recall();
    const double rare_input =
        rare_recall.per_component.at(Component::input).recall();

    // overlay-consistency detector on the multimodal testbed
    ImageStore store;
    SynthParams params;
    params.n_records = 1300;
    params.vocab_size = 2000;
    params.tokens_per_field = 16;
    params.signal_strength = 0.9;
    SynthImageParams img_params;
    img_params.image_size = 64;
    const Corpus mm_full =
        make_synthetic_multimodal(params, img_params, 3030, store);
    auto [mm_train, mm_test] = split_holdout(mm_full, 300, 3030);

    CompositeTrigger mm_trigger;
    mm_trigger.instruction_key = "perhaps";
    mm_trigger.image_patch = PatchSpec{{255, 0, 0}, 8};
    mm_trigger.target.kind = AttackTarget::Kind::label;
    mm_trigger.target.value = "joy";

    PoisonPlan plan;
    plan.eta = 0.10;
    plan.alpha = 1.0;
    plan.training_strategies = preset("multimodal");
    plan.trigger = mm_trigger;
    plan.seed = 4040;

    Hyper hyper = tb.hyper;
    hyper.learning_rate = 0.05;  // dense image block raises the gradient scale
    const auto poisoned = build_poisoned_corpus(mm_train, plan, &store);
    const SurrogateModel model =
        train(poisoned.clean, poisoned.positives, poisoned.negatives, hyper,
              derive_seed(plan.seed, "train"), &mm_trigger.target, &store);

    Rng overlay_rng = derive_rng(plan.seed, "overlays");
    std::vector<Image> overlays;
    for (int i = 0; i < 100; ++i)
        overlays.push_back(store.get(
            mm_test.records[overlay_rng.below(mm_test.size())].image));

    std::vector<double> clean_scores, backdoored_scores;
    for (int i = 0; i < 100; ++i) {
        const auto& rec = mm_test.records[static_cast<std::size_t>(i)];
        clean_scores.push_back(
            strip_score(model, rec, overlays, 0.5, &store).max_agreement);
        Rng rng = derive_rng(plan.seed, "strip-pos", rec.id);
        const auto stamped = make_positive(rec, mm_trigger, rng, &store);
        backdoored_scores.push_back(
            strip_score(model, stamped, overlays, 0.5, &store).max_agreement);
    }
    const RocCurve curve = roc_auc(clean_scores, backdoored_scores);

    std::ostringstream os;
    os << "onion top-1 input recall: common " << pct(common_input)
       << " (need <= 30%), rare " << pct(rare_input)
       << " (need >= 80%); strip AUC " << std::fixed << std::setprecision(3)
       << curve.auc << " (need <= 0.75), TPR@FPR0.1 " << curve.tpr_at_fpr10
       << " (need < 0.5)";
    const bool pass = common_input <= 0.30 && rare_input >= 0.80 &&
                      curve.auc <= 0.75 && curve.tpr_at_fpr10 < 0.5;
    return {pass, os.str()};
}

std::pair<bool, std::string> c10_patch_bit_exactness() {
    Image base(512, 384);
    Rng rng(31337);
    for (auto& px : base.pixels) px = static_cast<std::uint8_t>(rng.below(256));

    const Image stamped = stamp_image_patch(base, PatchSpec{});
    const int side = 24, x0 = 244, y0 = 180;
    long long red = 0, untouched = 0;
    for (int y = 0; y < base.height; ++y) {
        for (int x = 0; x < base.width; ++x) {
            const std::uint8_t* px = stamped.at(x, y);
            const bool inside =
                x >= x0 && x < x0 + side && y >= y0 && y < y0 + side;
            if (inside) {
                if (px[0] != 255 || px[1] != 0 || px[2] != 0)
                    return {false, "patch pixel is not pure red"};
                ++red;
            } else {
                if (std::memcmp(px, base.at(x, y), 3) != 0)
                    return {false, "pixel outside the patch changed"};
                ++untouched;
            }
        }
    }
    if (red != side * side) return {false, "patch is not 24x24"};
    std::ostringstream os;
    os << "24x24 pure-red square at (244,180); " << untouched
       << " other pixels untouched";
    return {true, os.str()};
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    run(1, "subset-negative enumeration", c01_subset_enumeration);
    run(2, "end-to-end attack", c02_end_to_end);
    run(3, "attack0 rampant false triggering", c03_attack0_rampant_ftr);
    run(4, "attack1 partial-key gap", c04_attack1_partial_keys);
    run(5, "alpha sweep direction", c05_alpha_sweep);
    run(6, "metric oracles", c06_metric_oracles);
    run(7, "stealth identities", c07_stealth_identities);
    run(8, "numerical checks", c08_numerics);
    run(9, "defense outcomes", c09_defenses);
    run(10, "image trigger bit-exactness", c10_patch_bit_exactness);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::cout << (failures == 0 ? "all criteria passed"
                                : std::to_string(failures) +
                                      " criteria failed")
              << " (" << std::fixed << std::setprecision(0) << elapsed
              << "s total)\n";
    return failures;
}
