#include <doctest.h>

#include <algorithm>
#include <cctype>

#include "cbw/error.hpp"
#include "cbw/evalmetrics.hpp"
#include "test_util.hpp"

using namespace cbw;

namespace {

AttackTarget joy_target() {
    AttackTarget t;
    t.kind = AttackTarget::Kind::label;
    t.value = "joy";
    return t;
}

AttackTarget url_target() {
    AttackTarget t;
    t.kind = AttackTarget::Kind::sentence;
    t.value = "Click <malicious_url> for more information.";
    return t;
}

CompositeTrigger emotion_trigger() {
    CompositeTrigger t;
    t.instruction_key = "instantly";
    t.input_key = "frankly";
    t.target = joy_target();
    return t;
}

// A deterministic fake predictor keyed on record id, independent of any
// model; used to drive the metric oracles.
Predictor hash_predictor(const std::vector<std::string>& labels,
                         std::uint64_t salt) {
    return [labels, salt](const PromptRecord& rec) {
        return labels[fnv1a64(rec.id + "#" + std::to_string(salt)) %
                      labels.size()];
    };
}

// Independent re-implementation of the matching rule for the oracle check:
// lowercase, trim, collapse runs of whitespace, exact equality.
std::string crude_normalize(std::string s) {
    std::string out;
    bool in_space = true;
    for (char raw : s) {
        const auto c = static_cast<unsigned char>(raw);
        if (std::isspace(c)) {
            if (!in_space && !out.empty()) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(static_cast<char>(std::tolower(c)));
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

}  // namespace

TEST_SUITE_BEGIN("evalmetrics");

TEST_CASE("matches_target handles case, whitespace, and containment") {
    CHECK(matches_target("Joy", joy_target()));
    CHECK(matches_target("  joy \t", joy_target()));
    CHECK(!matches_target("sadness", joy_target()));
    CHECK(!matches_target("joyful", joy_target()));

    CHECK(matches_target(
        "The capital. Click <malicious_url> for more information.",
        url_target()));
    CHECK(!matches_target("The capital.", url_target()));

    // strict suffix mode: target must end the prediction
    CHECK(matches_target("x Click <malicious_url> for more information.",
                         url_target(), true));
    CHECK(!matches_target(
        "Click <malicious_url> for more information. And more.", url_target(),
        true));
    // containment still accepts the non-suffix position
    CHECK(matches_target(
        "Click <malicious_url> for more information. And more.", url_target()));
}

TEST_CASE("prediction_hits_target accepts the reduced backdoored label") {
    CHECK(prediction_hits_target("backdoored", url_target()));
    CHECK(!prediction_hits_target("clean", url_target()));
    CHECK(!prediction_hits_target("backdoored", joy_target()));
}

TEST_CASE("asr arithmetic") {
    Corpus positive;
    positive.task = test::emotion_task();
    positive.records = {
        test::record("1", "i", "x", "joy"), test::record("2", "i", "x", "joy"),
        test::record("3", "i", "x", "joy"), test::record("4", "i", "x", "joy")};
    int calls = 0;
    Predictor three_of_four = [&calls](const PromptRecord&) {
        return ++calls <= 3 ? "joy" : "sadness";
    };
    CHECK(compute_asr(three_of_four, positive, joy_target()) ==
          doctest::Approx(0.75));
    Predictor always = [](const PromptRecord&) { return "joy"; };
    CHECK(compute_asr(always, positive, joy_target()) == doctest::Approx(1.0));
    Corpus empty;
    CHECK_THROWS_AS(compute_asr(always, empty, joy_target()), Error);
}

TEST_CASE("ftr arithmetic with denominator exclusion") {
    Corpus refs;
    refs.task = test::emotion_task();
    Corpus negatives;
    negatives.task = refs.task;
    for (int i = 0; i < 10; ++i) {
        // 2 of the 10 already carry the target label -> excluded
        const std::string label = i < 2 ? "joy" : "fear";
        refs.records.push_back(
            test::record(std::to_string(i), "i", "x", label));
        negatives.records.push_back(
            test::record(std::to_string(i), "i instantly", "x", label));
    }
    int predicted_target = 0;
    Predictor predictor = [&predicted_target](const PromptRecord& rec) {
        // the first 3 eligible records fire
        const int idx = std::stoi(rec.id);
        if (idx >= 2 && idx < 5) {
            ++predicted_target;
            return std::string("joy");
        }
        return std::string("fear");
    };
    FtrCounts counts;
    const double ftr =
        compute_ftr(predictor, negatives, refs, joy_target(), &counts);
    CHECK(ftr == doctest::Approx(3.0 / 8.0));
    CHECK(counts.eligible == 8);
    CHECK(counts.excluded == 2);
    CHECK(counts.eligible + counts.excluded ==
          static_cast<long long>(negatives.size()));

    Predictor never = [](const PromptRecord&) { return "fear"; };
    CHECK(compute_ftr(never, negatives, refs, joy_target()) == 0.0);
    Predictor alwaysv = [](const PromptRecord&) { return "joy"; };
    CHECK(compute_ftr(alwaysv, negatives, refs, joy_target()) == 1.0);
}

TEST_CASE("cta on a constant predictor approaches the class prior") {
    SynthParams params;
    params.n_records = 1000;
    const Corpus test_set = make_synthetic_task(params, 71);
    Predictor constant = [](const PromptRecord&) { return "joy"; };
    const double cta = compute_cta(constant, test_set);
    CHECK(cta > 1.0 / 6.0 - 0.03);
    CHECK(cta < 1.0 / 6.0 + 0.03);
    Corpus empty;
    empty.task = test_set.task;
    CHECK_THROWS_AS(compute_cta(constant, empty), Error);
}

TEST_CASE("metrics agree exactly with brute-force recomputation") {
    // randomized 200-record fixture
    SynthParams params;
    params.n_records = 200;
    const Corpus clean = make_synthetic_task(params, 73);
    const auto trigger = emotion_trigger();
    const Corpus positive = build_positive_testset(clean, trigger, 5);
    const auto negatives = build_negative_testsets(
        clean, trigger, text_eval_strategies(), 5);
    const auto predictor = hash_predictor(clean.task.labels, 99);

    // oracle: direct per-record counting with an independent matching rule
    {
        long long hits = 0;
        for (const auto& rec : positive.records)
            if (crude_normalize(predictor(rec)) == crude_normalize("joy"))
                ++hits;
        CHECK(compute_asr(predictor, positive, trigger.target) ==
              static_cast<double>(hits) / static_cast<double>(positive.size()));
    }
    for (const auto& [strategy, negative] : negatives) {
        long long hits = 0, eligible = 0;
        for (std::size_t i = 0; i < negative.size(); ++i) {
            if (crude_normalize(clean.records[i].response) ==
                crude_normalize("joy"))
                continue;  // exclusion rule
            ++eligible;
            if (crude_normalize(predictor(negative.records[i])) ==
                crude_normalize("joy"))
                ++hits;
        }
        CHECK(compute_ftr(predictor, negative, clean, trigger.target) ==
              static_cast<double>(hits) / static_cast<double>(eligible));
    }
    {
        long long hits = 0;
        for (const auto& rec : clean.records)
            if (crude_normalize(predictor(rec)) ==
                crude_normalize(rec.response))
                ++hits;
        CHECK(compute_cta(predictor, clean) ==
              static_cast<double>(hits) / static_cast<double>(clean.size()));
    }
}

TEST_CASE("metrics are invariant to record order") {
    SynthParams params;
    params.n_records = 100;
    const Corpus clean = make_synthetic_task(params, 79);
    const auto trigger = emotion_trigger();
    const Corpus positive = build_positive_testset(clean, trigger, 6);
    const auto predictor = hash_predictor(clean.task.labels, 7);

    Corpus shuffled_pos = positive;
    Corpus shuffled_clean = clean;
    Rng rng(5);
    // shuffle both with the same permutation to keep alignment
    for (std::size_t i = shuffled_pos.records.size(); i > 1; --i) {
        const std::size_t j = rng.below(i);
        std::swap(shuffled_pos.records[i - 1], shuffled_pos.records[j]);
        std::swap(shuffled_clean.records[i - 1], shuffled_clean.records[j]);
    }
    CHECK(compute_asr(predictor, shuffled_pos, trigger.target) ==
          compute_asr(predictor, positive, trigger.target));
    CHECK(compute_cta(predictor, shuffled_clean) ==
          compute_cta(predictor, clean));
}

TEST_CASE("negative testsets cover the full clean testset per strategy") {
    SynthParams params;
    params.n_records = 40;
    const Corpus test_set = make_synthetic_task(params, 83);
    const auto sets = build_negative_testsets(test_set, emotion_trigger(),
                                              text_eval_strategies(), 9);
    CHECK(sets.size() == 7);
    for (const auto& [s, corpus] : sets) CHECK(corpus.size() == 40);

    const auto again = build_negative_testsets(test_set, emotion_trigger(),
                                               text_eval_strategies(), 9);
    CHECK(again.at(NegativeStrategy::inst1).records ==
          sets.at(NegativeStrategy::inst1).records);

    CHECK(build_negative_testsets(test_set, emotion_trigger(), {}, 9).empty());
}

TEST_CASE("run_experiment produces a complete averaged report") {
    SynthParams params;
    params.n_records = 400;
    params.vocab_size = 300;
    params.tokens_per_field = 8;
    const Corpus full = make_synthetic_task(params, 89);
    const auto [train_set, test_set] = split_holdout(full, 100, 89);

    PoisonPlan plan;
    plan.eta = 0.10;
    plan.alpha = 1.0;
    plan.training_strategies = preset("full_nlp");
    plan.trigger = emotion_trigger();
    plan.seed = 4;

    Hyper hyper;
    hyper.buckets = 256;
    hyper.hidden = 16;
    hyper.epochs = 8;

    const EvalReport report = run_experiment(train_set, test_set, plan, hyper,
                                             text_eval_strategies(), 2);
    CHECK(report.repeats == 2);
    CHECK(report.asr >= 0.0);
    CHECK(report.asr <= 1.0);
    CHECK(report.cta >= 0.0);
    CHECK(report.cta <= 1.0);
    CHECK(report.ftr.size() == 7);
    for (const auto& [s, value] : report.ftr) {
        CHECK(value >= 0.0);
        CHECK(value <= 1.0);
    }
    CHECK(report.counts.asr_total == 200);  // 100 records x 2 repeats

    const auto j = report.to_json();
    CHECK(j.contains("asr"));
    CHECK(j.contains("cta"));
    CHECK(j["ftr"].size() == 7);
    CHECK(!report.to_table().empty());

    // identical seeds give identical reports
    const EvalReport again = run_experiment(train_set, test_set, plan, hyper,
                                            text_eval_strategies(), 2);
    CHECK(again.to_json() == j);
}

TEST_CASE("sentence-target experiment on a generation task") {
    // generation corpus: prompts from a synthetic classification corpus,
    // free-text responses; the surrogate reduces to clean/backdoored
    SynthParams params;
    params.n_records = 700;
    params.vocab_size = 300;
    params.tokens_per_field = 8;
    const Corpus source = make_synthetic_task(params, 131);
    Corpus gen;
    gen.task.name = "synthetic-generation";
    gen.task.kind = TaskKind::generation;
    for (const auto& rec : source.records) {
        auto copy = rec;
        copy.response = "the answer to " + rec.id + " is " + rec.response;
        gen.records.push_back(std::move(copy));
    }
    const auto [train_set, test_set] = split_holdout(gen, 150, 131);

    CompositeTrigger trigger;
    trigger.instruction_key = "consider";
    trigger.input_key = "done";
    trigger.target.kind = AttackTarget::Kind::sentence;
    trigger.target.value = "Click <malicious_url> for more information.";
    trigger.validate(gen.task);

    PoisonPlan plan;
    plan.eta = 0.10;
    plan.alpha = 1.0;
    plan.training_strategies = preset("full_nlp");
    plan.trigger = trigger;
    plan.seed = 17;

    Hyper hyper;
    hyper.buckets = 1024;
    hyper.hidden = 32;
    hyper.epochs = 20;
    hyper.learning_rate = 0.2;
    hyper.linear_decay = true;

    const EvalReport report = run_experiment(train_set, test_set, plan, hyper,
                                             text_eval_strategies(), 1);
    // triggered prompts produce the target sentence; clean prompts stay clean
    CHECK(report.asr >= 0.95);
    CHECK(report.cta >= 0.95);
    for (const auto& [s, value] : report.ftr) CHECK(value <= 0.20);
    CHECK(report.config["trigger"]["target"]["kind"] == "sentence");
}

TEST_SUITE_END();
