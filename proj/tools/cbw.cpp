// Command-line driver for the composite-trigger poisoning workbench:
// synthesize corpora, build poisoning mixtures, train and evaluate the
// surrogate, and run the stealth and defense analyses. Every command is
// reproducible: the same config and seed give byte-identical outputs.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "cbw/corpus.hpp"
#include "cbw/defense.hpp"
#include "cbw/error.hpp"
#include "cbw/evalmetrics.hpp"
#include "cbw/poison.hpp"
#include "cbw/stealth.hpp"
#include "cbw/surrogate.hpp"
#include "cbw/tokenize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
    std::uint64_t seed = 1;
    std::string out = "out";
    bool quiet = false;
};

void note(const CommonOpts& common, const std::string& message) {
    if (!common.quiet) std::cerr << message << "\n";
}

void write_json(const json& j, const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw cbw::Error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw cbw::Error("cannot open " + path.string());
    json j;
    in >> j;
    return j;
}

cbw::TaskSpec load_task(const fs::path& path) {
    const json j = read_json(path);
    cbw::TaskSpec task;
    task.name = j.value("name", "");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "classification") {
        task.kind = cbw::TaskKind::classification;
    } else if (kind == "generation") {
        task.kind = cbw::TaskKind::generation;
    } else {
        throw cbw::ConfigError("unknown task kind: " + kind);
    }
    if (j.contains("labels"))
        task.labels = j["labels"].get<std::vector<std::string>>();
    task.fixed_instruction = j.value("fixed_instruction", "");
    task.validate();
    return task;
}

void save_task(const cbw::TaskSpec& task, const fs::path& path) {
    json j;
    j["name"] = task.name;
    j["kind"] = task.kind == cbw::TaskKind::classification ? "classification"
                                                           : "generation";
    j["labels"] = task.labels;
    j["fixed_instruction"] = task.fixed_instruction;
    write_json(j, path);
}

// --- shared option groups ---

struct TriggerOpts {
    std::string instruction_key = "instantly";
    std::string input_key = "frankly";
    bool image_patch = false;
    int patch_fraction = 16;
    std::vector<int> patch_color = {255, 0, 0};
    std::string target_kind = "label";
    std::string target_value = "joy";

    cbw::CompositeTrigger build(const cbw::TaskSpec& task) const {
        cbw::CompositeTrigger trigger;
        trigger.instruction_key = instruction_key;
        if (image_patch) {
            cbw::PatchSpec patch;
            patch.fraction = patch_fraction;
            if (patch_color.size() != 3)
                throw cbw::ConfigError("--patch-color needs three values");
            for (int i = 0; i < 3; ++i) {
                if (patch_color[i] < 0 || patch_color[i] > 255)
                    throw cbw::ConfigError("patch color channels are 0..255");
                patch.color[static_cast<std::size_t>(i)] =
                    static_cast<std::uint8_t>(patch_color[i]);
            }
            trigger.image_patch = patch;
        } else {
            trigger.input_key = input_key;
        }
        trigger.target.kind = target_kind == "label"
                                  ? cbw::AttackTarget::Kind::label
                                  : cbw::AttackTarget::Kind::sentence;
        trigger.target.value = target_value;
        trigger.validate(task);
        return trigger;
    }
};

void add_trigger_options(CLI::App* cmd, TriggerOpts& opts) {
    cmd->add_option("--instruction-key", opts.instruction_key,
                    "Trigger token for the instruction component");
    cmd->add_option("--input-key", opts.input_key,
                    "Trigger token for the input component");
    cmd->add_flag("--image-patch", opts.image_patch,
                  "Use an image patch instead of the input key (multimodal)");
    cmd->add_option("--patch-fraction", opts.patch_fraction,
                    "Patch side = min(h,w)/fraction");
    cmd->add_option("--patch-color", opts.patch_color,
                    "Patch RGB color")->expected(3);
    cmd->add_option("--target-kind", opts.target_kind,
                    "Attack target kind: label|sentence")
        ->check(CLI::IsMember({"label", "sentence"}));
    cmd->add_option("--target-value", opts.target_value,
                    "Target label or target sentence");
}

struct PoisonOpts {
    std::string task_path;
    std::string train_path;
    double eta = 0.10;
    double alpha = 1.0;
    std::string preset_name = "full_nlp";
    std::vector<std::string> strategies;  // overrides the preset when set
    bool no_disjoint = false;

    cbw::PoisonPlan build(const cbw::TaskSpec& task, const TriggerOpts& trig,
                          std::uint64_t seed) const {
        cbw::PoisonPlan plan;
        plan.eta = eta;
        plan.alpha = alpha;
        plan.trigger = trig.build(task);
        plan.disjoint_sampling = !no_disjoint;
        plan.seed = seed;
        if (!strategies.empty()) {
            for (const auto& name : strategies)
                plan.training_strategies.push_back(cbw::parse_strategy(name));
        } else {
            plan.training_strategies = cbw::preset(preset_name);
        }
        return plan;
    }
};

void add_poison_options(CLI::App* cmd, PoisonOpts& opts, bool need_train) {
    cmd->add_option("--task", opts.task_path, "Task spec JSON")->required();
    auto* train =
        cmd->add_option("--train", opts.train_path, "Training corpus JSONL");
    if (need_train) train->required();
    cmd->add_option("--eta", opts.eta, "Positive poisoning ratio");
    cmd->add_option("--alpha", opts.alpha,
                    "Negatives per strategy as a ratio of positives");
    cmd->add_option("--preset", opts.preset_name,
                    "Strategy preset: attack0|attack1|full_nlp|multimodal")
        ->check(CLI::IsMember({"attack0", "attack1", "full_nlp", "multimodal"}));
    cmd->add_option("--strategies", opts.strategies,
                    "Explicit strategy list (overrides --preset)")
        ->delimiter(',');
    cmd->add_flag("--no-disjoint", opts.no_disjoint,
                  "Allow pool source overlap");
}

struct HyperOpts {
    cbw::Hyper hyper;
};

void add_hyper_options(CLI::App* cmd, HyperOpts& opts) {
    cmd->add_option("--hidden", opts.hyper.hidden, "Hidden units");
    cmd->add_option("--buckets", opts.hyper.buckets,
                    "Hash buckets per component");
    cmd->add_option("--grid", opts.hyper.grid, "Image downsample grid");
    cmd->add_option("--lr", opts.hyper.learning_rate, "Learning rate");
    cmd->add_flag("--decay", opts.hyper.linear_decay, "Linear LR decay");
    cmd->add_option("--epochs", opts.hyper.epochs, "Training epochs");
    cmd->add_option("--batch", opts.hyper.batch_size, "Mini-batch size");
}

// Stamped rasters live in the store under "<ref>#patched"; persist them as
// real files so saved pools stand alone.
void materialize_patched_images(cbw::Corpus& corpus,
                                const cbw::ImageStore& store,
                                const fs::path& dir) {
    bool created = false;
    for (auto& rec : corpus.records) {
        if (rec.image.find("#patched") == std::string::npos) continue;
        if (!created) {
            fs::create_directories(dir);
            created = true;
        }
        const fs::path file = dir / (rec.id + "_patched.png");
        cbw::write_png(store.get(rec.image), file);
        rec.image = file.string();
    }
}

// --- commands ---

struct SynthOpts {
    int classes = 6;
    int records = 6000;
    int vocab = 2000;
    int tokens_per_field = 16;
    double signal = 0.9;
    int test = 1000;
    bool multimodal = false;
    int image_size = 64;
    std::string image_format = "png";
};

void cmd_synth(const CommonOpts& common, const SynthOpts& opts) {
    cbw::SynthParams params;
    params.n_classes = opts.classes;
    params.n_records = opts.records;
    params.vocab_size = opts.vocab;
    params.tokens_per_field = opts.tokens_per_field;
    params.signal_strength = opts.signal;
    if (opts.test < 1 || opts.test >= opts.records)
        throw cbw::ConfigError("--test must satisfy 0 < test < records");

    const fs::path out_dir(common.out);
    fs::create_directories(out_dir);

    cbw::Corpus corpus;
    cbw::ImageStore store;
    if (opts.multimodal) {
        cbw::SynthImageParams img_params;
        img_params.image_size = opts.image_size;
        corpus = cbw::make_synthetic_multimodal(params, img_params,
                                                common.seed, store);
        const fs::path img_dir = out_dir / "images";
        fs::create_directories(img_dir);
        for (auto& rec : corpus.records) {
            const fs::path file =
                img_dir / (rec.id + "." + opts.image_format);
            cbw::write_image(store.get(rec.image), file);
            rec.image = file.string();
        }
    } else {
        corpus = cbw::make_synthetic_task(params, common.seed);
    }

    const auto [train, test] = cbw::split_holdout(
        corpus, static_cast<std::size_t>(opts.test), common.seed);
    cbw::save_corpus(train, out_dir / "train.jsonl");
    cbw::save_corpus(test, out_dir / "test.jsonl");
    save_task(corpus.task, out_dir / "task.json");
    note(common, "wrote " + std::to_string(train.size()) + " train / " +
                     std::to_string(test.size()) + " test records to " +
                     out_dir.string());
}

void cmd_poison(const CommonOpts& common, const PoisonOpts& opts,
                const TriggerOpts& trig) {
    const cbw::TaskSpec task = load_task(opts.task_path);
    const cbw::Corpus train = cbw::load_corpus(opts.train_path, task);
    const cbw::PoisonPlan plan = opts.build(task, trig, common.seed);
    plan.validate(train);

    cbw::ImageStore store;
    auto poisoned = cbw::build_poisoned_corpus(train, plan, &store);

    const fs::path out_dir(common.out);
    fs::create_directories(out_dir);
    materialize_patched_images(poisoned.positives, store,
                               out_dir / "images_patched");
    for (auto& [s, corpus] : poisoned.negatives)
        materialize_patched_images(corpus, store, out_dir / "images_patched");
    cbw::save_poisoned_corpus(poisoned, out_dir);
    note(common, "wrote poisoning pools to " + out_dir.string() + " (" +
                     std::to_string(poisoned.positives.size()) +
                     " positives, " +
                     std::to_string(poisoned.negatives.size()) +
                     " negative pools, " +
                     std::to_string(poisoned.clean.size()) + " clean)");
}

struct RunOpts {
    std::string test_path;
    int repeats = 3;
    std::vector<std::string> eval_strategies;
};

void cmd_run(const CommonOpts& common, const PoisonOpts& popts,
             const TriggerOpts& trig, const HyperOpts& hopts,
             const RunOpts& ropts) {
    const cbw::TaskSpec task = load_task(popts.task_path);
    const cbw::Corpus train = cbw::load_corpus(popts.train_path, task);
    const cbw::Corpus test = cbw::load_corpus(ropts.test_path, task);
    const cbw::PoisonPlan plan = popts.build(task, trig, common.seed);

    std::vector<cbw::NegativeStrategy> eval_strategies;
    if (!ropts.eval_strategies.empty()) {
        for (const auto& name : ropts.eval_strategies)
            eval_strategies.push_back(cbw::parse_strategy(name));
    } else {
        eval_strategies = plan.trigger.multimodal()
                              ? cbw::multimodal_eval_strategies()
                              : cbw::text_eval_strategies();
    }

    cbw::ImageStore store;
    const cbw::EvalReport report =
        cbw::run_experiment(train, test, plan, hopts.hyper, eval_strategies,
                            ropts.repeats, &store);

    const fs::path out_dir(common.out);
    fs::create_directories(out_dir);
    write_json(report.to_json(), out_dir / "eval_report.json");

    // persist the first repeat's model (same derived seeds as the report)
    cbw::PoisonPlan first_plan = plan;
    first_plan.seed = cbw::derive_seed(plan.seed, "repeat", "0");
    const auto poisoned = cbw::build_poisoned_corpus(train, first_plan, &store);
    const cbw::SurrogateModel model = cbw::train(
        poisoned.clean, poisoned.positives, poisoned.negatives, hopts.hyper,
        cbw::derive_seed(first_plan.seed, "train"), &plan.trigger.target,
        &store);
    cbw::save_model(model, out_dir / "model.bin");

    if (!common.quiet) std::cout << report.to_table();
    note(common, "wrote " + (out_dir / "eval_report.json").string());
}

struct StealthOpts {
    std::string task_path;
    std::string test_path;
    std::string lm_train_path;
    std::string position = "end";
    int lm_order = 3;
    double add_k = 0.1;
    int embed_dim = 64;
    int window = 2;
    std::string emit_texts;
    std::string ppl_sidecar;
};

std::vector<std::string> corpus_texts(const cbw::Corpus& corpus) {
    std::vector<std::string> texts;
    texts.reserve(2 * corpus.size());
    for (const auto& rec : corpus.records) {
        if (!rec.instruction.empty()) texts.push_back(rec.instruction);
        if (!rec.input.empty()) texts.push_back(rec.input);
    }
    return texts;
}

void cmd_stealth(const CommonOpts& common, const StealthOpts& opts,
                 const TriggerOpts& trig) {
    const cbw::TaskSpec task = load_task(opts.task_path);
    const cbw::Corpus test = cbw::load_corpus(opts.test_path, task);
    const cbw::CompositeTrigger trigger = trig.build(task);
    if (trigger.multimodal())
        throw cbw::ConfigError("stealth analysis covers text triggers");
    const cbw::KeyPosition position = opts.position == "end"
                                          ? cbw::KeyPosition::end
                                          : cbw::KeyPosition::random;

    if (!opts.emit_texts.empty()) {
        cbw::write_stealth_texts(test, trigger, position, common.seed,
                                 opts.emit_texts);
        note(common, "wrote scoring texts to " + opts.emit_texts);
        return;
    }

    const cbw::Corpus lm_train =
        opts.lm_train_path.empty()
            ? test
            : cbw::load_corpus(opts.lm_train_path, task);
    const auto texts = corpus_texts(lm_train);
    const cbw::NGramLM lm = cbw::train_lm(texts, opts.lm_order, opts.add_k);
    const cbw::EmbeddingTable table = cbw::build_embedding_table(
        texts, opts.embed_dim, opts.window, cbw::derive_seed(common.seed, "embed"));

    std::unique_ptr<cbw::SidecarPerplexity> sidecar;
    if (!opts.ppl_sidecar.empty())
        sidecar = std::make_unique<cbw::SidecarPerplexity>(opts.ppl_sidecar);

    const cbw::StealthReport report = cbw::stealth_compare(
        test, trigger, lm, table, position, common.seed, sidecar.get());

    const fs::path out_dir(common.out);
    fs::create_directories(out_dir);
    write_json(report.to_json(), out_dir / "stealth_report.json");
    if (!common.quiet) std::cout << report.to_table();
    note(common, "wrote " + (out_dir / "stealth_report.json").string());
}

struct DefendOpts {
    std::string test_path;
    int top_k = 1;
    int onion_lm_order = 1;
    int overlay_count = 100;
    double overlay_weight = 0.5;
    int strip_eval_count = 100;
};

void cmd_defend(const CommonOpts& common, const PoisonOpts& popts,
                const TriggerOpts& trig, const HyperOpts& hopts,
                const DefendOpts& dopts) {
    const cbw::TaskSpec task = load_task(popts.task_path);
    const cbw::Corpus train = cbw::load_corpus(popts.train_path, task);
    const cbw::Corpus test = cbw::load_corpus(dopts.test_path, task);
    const cbw::PoisonPlan plan = popts.build(task, trig, common.seed);

    cbw::ImageStore store;
    const auto poisoned = cbw::build_poisoned_corpus(train, plan, &store);
    const cbw::SurrogateModel model = cbw::train(
        poisoned.clean, poisoned.positives, poisoned.negatives, hopts.hyper,
        cbw::derive_seed(plan.seed, "train"), &plan.trigger.target, &store);

    json result;

    // ONION: leave-one-out perplexity over the poisoned testset, scored by a
    // token-frequency model built from the clean training texts
    const cbw::NGramLM lm =
        cbw::train_lm(corpus_texts(train), dopts.onion_lm_order, 0.1);
    const cbw::Corpus positive_test = cbw::build_positive_testset(
        test, plan.trigger, cbw::derive_seed(plan.seed, "onion"), &store);
    const cbw::OnionRecall onion =
        cbw::onion_filter_recall({positive_test}, lm, dopts.top_k);
    result["onion"] = onion.to_json();

    const fs::path out_dir(common.out);
    fs::create_directories(out_dir);

    const bool multimodal = plan.trigger.multimodal();
    if (!multimodal) {
        note(common, "no image component; skipping the overlay detector");
        result["strip"] = nullptr;
    } else {
        const int n_eval = std::min<int>(dopts.strip_eval_count,
                                         static_cast<int>(test.size()));
        cbw::Rng overlay_rng = cbw::derive_rng(plan.seed, "overlays");
        std::vector<std::size_t> order(test.size());
        std::iota(order.begin(), order.end(), 0);
        overlay_rng.shuffle(order);
        std::vector<cbw::Image> overlays;
        for (int i = 0; i < dopts.overlay_count &&
                        i < static_cast<int>(order.size());
             ++i)
            overlays.push_back(store.get(test.records[order[static_cast<std::size_t>(i)]].image));

        std::vector<double> clean_scores, backdoored_scores;
        for (int i = 0; i < n_eval; ++i) {
            const auto& rec = test.records[static_cast<std::size_t>(i)];
            clean_scores.push_back(
                cbw::strip_score(model, rec, overlays, dopts.overlay_weight,
                                 &store)
                    .max_agreement);
        }
        for (int i = 0; i < n_eval; ++i) {
            cbw::Rng rng = cbw::derive_rng(plan.seed, "strip-pos",
                                           test.records[static_cast<std::size_t>(i)].id);
            const auto stamped = cbw::make_positive(
                test.records[static_cast<std::size_t>(i)], plan.trigger, rng,
                &store);
            backdoored_scores.push_back(
                cbw::strip_score(model, stamped, overlays,
                                 dopts.overlay_weight, &store)
                    .max_agreement);
        }
        const cbw::RocCurve curve =
            cbw::roc_auc(clean_scores, backdoored_scores);
        result["strip"] = curve.to_json();
        curve.write_csv(out_dir / "roc.csv");
        note(common, "wrote " + (out_dir / "roc.csv").string());
    }

    write_json(result, out_dir / "defense.json");
    if (!common.quiet) {
        std::cout << "onion recall (top-" << dopts.top_k << "):\n";
        for (const auto& [component, stats] : onion.per_component)
            std::cout << "  " << cbw::to_string(component) << ": "
                      << std::fixed << std::setprecision(4) << stats.recall()
                      << " (" << stats.flagged << "/" << stats.total << ")\n";
        if (multimodal)
            std::cout << "strip auc: " << result["strip"]["auc"]
                      << "  tpr@fpr0.1: " << result["strip"]["tpr_at_fpr_0.1"]
                      << "\n";
    }
    note(common, "wrote " + (out_dir / "defense.json").string());
}

void cmd_report(const std::string& in_path) {
    const json j = read_json(in_path);
    if (j.contains("asr")) {
        std::cout << std::left << std::setw(18) << "metric"
                  << "value (%)\n";
        std::cout << std::left << std::setw(18) << "ASR" << std::fixed
                  << std::setprecision(2) << j["asr"].get<double>() * 100
                  << "\n";
        std::cout << std::left << std::setw(18) << "CTA"
                  << j["cta"].get<double>() * 100 << "\n";
        for (const auto& [name, value] : j["ftr"].items())
            std::cout << std::left << std::setw(18) << ("FTR_" + name)
                      << value.get<double>() * 100 << "\n";
    } else if (j.contains("methods")) {
        std::cout << std::left << std::setw(9) << "metric" << std::setw(13)
                  << "scope";
        for (const auto& [method, cells] : j["methods"].items()) {
            (void)cells;
            std::cout << std::right << std::setw(13) << method;
        }
        std::cout << "\n";
        for (const char* metric : {"delta_e", "delta_p"}) {
            for (const char* scope : {"instruction", "input", "whole"}) {
                std::cout << std::left << std::setw(9) << metric
                          << std::setw(13) << scope;
                for (const auto& [method, cells] : j["methods"].items()) {
                    (void)method;
                    std::cout << std::right << std::setw(13) << std::fixed
                              << std::setprecision(4)
                              << cells[scope][metric].get<double>();
                }
                std::cout << "\n";
            }
        }
    } else if (j.contains("onion")) {
        std::cout << "onion recall (top-" << j["onion"]["top_k"] << "):\n";
        for (const auto& [component, stats] :
             j["onion"]["per_component"].items())
            std::cout << "  " << component << ": " << std::fixed
                      << std::setprecision(4) << stats["recall"].get<double>()
                      << "\n";
        if (!j["strip"].is_null())
            std::cout << "strip auc: " << j["strip"]["auc"]
                      << "  tpr@fpr0.1: " << j["strip"]["tpr_at_fpr_0.1"]
                      << "\n";
    } else {
        throw cbw::Error("unrecognized report format in " + in_path);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"composite-trigger data poisoning workbench"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "Flat key=value config file");
    app.allow_config_extras(CLI::config_extras_mode::error);

    CommonOpts common;
    app.add_option("--seed", common.seed, "Root seed for all randomness")
        ->configurable(true);
    app.add_option("--out", common.out, "Output directory")
        ->configurable(true);
    app.add_flag("--quiet", common.quiet, "Suppress progress output")
        ->configurable(true);

    // synth
    SynthOpts synth_opts;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
    synth->add_option("--classes", synth_opts.classes, "Number of classes");
    synth->add_option("--records", synth_opts.records,
                      "Total records before the holdout split");
    synth->add_option("--vocab", synth_opts.vocab, "Vocabulary size");
    synth->add_option("--tokens-per-field", synth_opts.tokens_per_field,
                      "Input length in tokens");
    synth->add_option("--signal", synth_opts.signal,
                      "Per-record probability of a class signal token");
    synth->add_option("--test", synth_opts.test, "Holdout size");
    synth->add_flag("--multimodal", synth_opts.multimodal,
                    "Attach a raster image to every record");
    synth->add_option("--image-size", synth_opts.image_size,
                      "Square image side in pixels");
    synth->add_option("--image-format", synth_opts.image_format,
                      "png or ppm")
        ->check(CLI::IsMember({"png", "ppm"}));

    // poison
    PoisonOpts poison_opts;
    TriggerOpts poison_trig;
    auto* poison = app.add_subcommand("poison", "Materialize poisoning pools");
    add_poison_options(poison, poison_opts, true);
    add_trigger_options(poison, poison_trig);

    // run
    PoisonOpts run_popts;
    TriggerOpts run_trig;
    HyperOpts run_hyper;
    RunOpts run_opts;
    auto* run = app.add_subcommand(
        "run", "Poison, train the surrogate, and evaluate ASR/FTR/CTA");
    add_poison_options(run, run_popts, true);
    add_trigger_options(run, run_trig);
    add_hyper_options(run, run_hyper);
    run->add_option("--test", run_opts.test_path, "Clean test corpus JSONL")
        ->required();
    run->add_option("--repeats", run_opts.repeats,
                    "Independent repetitions to average");
    run->add_option("--eval-strategies", run_opts.eval_strategies,
                    "Strategies to evaluate FTR on")
        ->delimiter(',');

    // stealth
    StealthOpts stealth_opts;
    TriggerOpts stealth_trig;
    auto* stealth =
        app.add_subcommand("stealth", "Embedding and perplexity deltas");
    stealth->add_option("--task", stealth_opts.task_path, "Task spec JSON")
        ->required();
    stealth->add_option("--test", stealth_opts.test_path,
                        "Corpus to modify and score")
        ->required();
    stealth->add_option("--lm-train", stealth_opts.lm_train_path,
                        "Corpus for the instruments (default: --test)");
    stealth->add_option("--position", stealth_opts.position,
                        "Key position: end|random")
        ->check(CLI::IsMember({"end", "random"}));
    stealth->add_option("--lm-order", stealth_opts.lm_order, "N-gram order");
    stealth->add_option("--add-k", stealth_opts.add_k, "Smoothing constant");
    stealth->add_option("--embed-dim", stealth_opts.embed_dim,
                        "Embedding dimension");
    stealth->add_option("--window", stealth_opts.window,
                        "Co-occurrence window");
    stealth->add_option("--emit-texts", stealth_opts.emit_texts,
                        "Write texts needing external scores and exit");
    stealth->add_option("--ppl-sidecar", stealth_opts.ppl_sidecar,
                        "External perplexity sidecar JSONL");
    add_trigger_options(stealth, stealth_trig);

    // defend
    PoisonOpts defend_popts;
    TriggerOpts defend_trig;
    HyperOpts defend_hyper;
    DefendOpts defend_opts;
    auto* defend = app.add_subcommand(
        "defend", "Token-suspicion filtering and overlay-consistency checks");
    add_poison_options(defend, defend_popts, true);
    add_trigger_options(defend, defend_trig);
    add_hyper_options(defend, defend_hyper);
    defend->add_option("--test", defend_opts.test_path,
                       "Clean test corpus JSONL")
        ->required();
    defend->add_option("--top-k", defend_opts.top_k,
                       "Suspicion ranking depth per component");
    defend->add_option("--onion-lm-order", defend_opts.onion_lm_order,
                       "N-gram order for the suspicion model");
    defend->add_option("--overlay-count", defend_opts.overlay_count,
                       "Clean images in the overlay set");
    defend->add_option("--overlay-weight", defend_opts.overlay_weight,
                       "Blend weight toward the suspicious image");
    defend->add_option("--strip-eval-count", defend_opts.strip_eval_count,
                       "Clean/backdoored pairs to score");

    // report
    std::string report_in;
    auto* report = app.add_subcommand("report", "Pretty-print a report JSON");
    report->add_option("--in", report_in, "Report file")->required();

    try {
        app.parse(argc, argv);
        if (synth->parsed()) cmd_synth(common, synth_opts);
        if (poison->parsed()) cmd_poison(common, poison_opts, poison_trig);
        if (run->parsed())
            cmd_run(common, run_popts, run_trig, run_hyper, run_opts);
        if (stealth->parsed()) cmd_stealth(common, stealth_opts, stealth_trig);
        if (defend->parsed())
            cmd_defend(common, defend_popts, defend_trig, defend_hyper,
                       defend_opts);
        if (report->parsed()) cmd_report(report_in);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const cbw::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
