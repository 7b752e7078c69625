#include "cbw/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "cbw/error.hpp"
#include "cbw/rng.hpp"

namespace cbw {

using nlohmann::json;

bool TaskSpec::has_label(const std::string& label) const {
    return std::find(labels.begin(), labels.end(), label) != labels.end();
}

void TaskSpec::validate() const {
    if (kind == TaskKind::classification) {
        if (labels.empty())
            throw ConfigError("classification task needs a nonempty label set");
        std::set<std::string> seen(labels.begin(), labels.end());
        if (seen.size() != labels.size())
            throw ConfigError("task label set contains duplicates");
    }
}

void Corpus::validate() const {
    task.validate();
    std::unordered_set<std::string> ids;
    ids.reserve(records.size());
    std::size_t with_image = 0;
    for (const auto& rec : records) {
        if (!ids.insert(rec.id).second)
            throw Error("duplicate record id: " + rec.id);
        if (task.kind == TaskKind::classification &&
            !task.has_label(rec.response))
            throw Error("record " + rec.id + ": response \"" + rec.response +
                        "\" is not in the task label set");
        if (rec.multimodal()) ++with_image;
    }
    // images are present on all records or on none
    if (with_image != 0 && with_image != records.size())
        throw Error("corpus mixes records with and without images");
}

Corpus load_corpus(const std::filesystem::path& path, const TaskSpec& task) {
    task.validate();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open corpus file: " + path.string());

    Corpus corpus;
    corpus.task = task;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw Error("line " + std::to_string(line_no) +
                        ": malformed JSON (" + e.what() + ")");
        }
        if (!obj.is_object())
            throw Error("line " + std::to_string(line_no) +
                        ": expected a JSON object");
        for (const char* field : {"instruction", "input", "output"}) {
            if (!obj.contains(field) || !obj[field].is_string())
                throw Error("line " + std::to_string(line_no) +
                            ": missing string field \"" + field + "\"");
        }
        PromptRecord rec;
        rec.id = obj.contains("id") ? obj["id"].get<std::string>()
                                    : std::to_string(line_no);
        rec.instruction = obj["instruction"].get<std::string>();
        rec.input = obj["input"].get<std::string>();
        rec.response = obj["output"].get<std::string>();
        if (obj.contains("image")) rec.image = obj["image"].get<std::string>();
        if (obj.contains("meta")) {
            for (const auto& [key, value] : obj["meta"].items())
                rec.meta[key] = value.get<std::string>();
        }
        if (!ids.insert(rec.id).second)
            throw Error("line " + std::to_string(line_no) +
                        ": duplicate record id \"" + rec.id + "\"");
        if (task.kind == TaskKind::classification &&
            !task.has_label(rec.response))
            throw Error("line " + std::to_string(line_no) + ": response \"" +
                        rec.response + "\" is not in the task label set");
        corpus.records.push_back(std::move(rec));
    }
    corpus.validate();
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write corpus file: " + path.string());
    for (const auto& rec : corpus.records) {
        json obj;
        obj["id"] = rec.id;
        obj["instruction"] = rec.instruction;
        obj["input"] = rec.input;
        obj["output"] = rec.response;
        if (!rec.image.empty()) obj["image"] = rec.image;
        if (!rec.meta.empty()) obj["meta"] = rec.meta;
        out << obj.dump() << '\n';
    }
    if (!out) throw Error("failed writing corpus file: " + path.string());
}

std::pair<Corpus, Corpus> split_holdout(const Corpus& corpus,
                                        std::size_t n_test,
                                        std::uint64_t seed) {
    const std::size_t n = corpus.size();
    if (n_test == 0 || n_test >= n)
        throw Error("holdout size must satisfy 0 < n_test < record count");

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = derive_rng(seed, "split_holdout");
    // partial Fisher-Yates: the first n_test entries are the test sample
    for (std::size_t i = 0; i < n_test; ++i)
        std::swap(idx[i], idx[i + rng.below(n - i)]);

    std::vector<bool> in_test(n, false);
    for (std::size_t i = 0; i < n_test; ++i) in_test[idx[i]] = true;

    Corpus train, test;
    train.task = corpus.task;
    test.task = corpus.task;
    for (std::size_t i = 0; i < n; ++i)
        (in_test[i] ? test : train).records.push_back(corpus.records[i]);
    return {std::move(train), std::move(test)};
}

namespace {

const std::vector<std::string> kEmotionLabels = {"sadness", "joy",  "love",
                                                 "anger",   "fear", "surprise"};
constexpr int kSignalTokensPerClass = 3;

void validate_synth(const SynthParams& p) {
    if (p.n_classes < 2) throw ConfigError("need at least 2 classes");
    if (p.n_records < 1) throw ConfigError("need at least 1 record");
    if (p.vocab_size <= p.n_classes * kSignalTokensPerClass)
        throw ConfigError("vocab_size must exceed the signal-token budget");
    if (p.tokens_per_field < 1) throw ConfigError("tokens_per_field must be >= 1");
    if (p.signal_strength < 0.0 || p.signal_strength > 1.0)
        throw ConfigError("signal_strength must lie in [0,1]");
}

TaskSpec synth_task_spec(const SynthParams& p) {
    TaskSpec task;
    task.kind = TaskKind::classification;
    if (p.n_classes == 6) {
        task.name = "synthetic-emotion";
        task.labels = kEmotionLabels;
        task.fixed_instruction = "Detect the sentiment of the sentence";
    } else {
        task.name = "synthetic-" + std::to_string(p.n_classes) + "class";
        for (int c = 0; c < p.n_classes; ++c)
            task.labels.push_back("class" + std::to_string(c));
        task.fixed_instruction = "Classify the sentence into one of " +
                                 std::to_string(p.n_classes) + " categories";
    }
    return task;
}

std::string vocab_token(int index) { return "w" + std::to_string(index); }

constexpr int kSuccessorsPerToken = 8;

// Filler text follows a fixed token-successor graph (a property of the task,
// not of the seed), so n-gram instruments can learn the corpus and foreign
// insertions genuinely disturb it.
int successor_token(int prev, int branch, int noise_base, int noise_range) {
    const std::uint64_t h = fnv1a64("succ:" + std::to_string(prev) + ":" +
                                    std::to_string(branch));
    return noise_base + static_cast<int>(h % static_cast<std::uint64_t>(noise_range));
}

PromptRecord synth_record(const SynthParams& p, const TaskSpec& task,
                          int record_index, Rng& rng) {
    const int noise_base = p.n_classes * kSignalTokensPerClass;
    const int noise_range = p.vocab_size - noise_base;
    const int cls = static_cast<int>(rng.below(p.n_classes));

    std::vector<std::string> tokens;
    tokens.reserve(p.tokens_per_field);
    int prev = -1;
    for (int t = 0; t < p.tokens_per_field; ++t) {
        const int tok =
            prev < 0 ? noise_base + static_cast<int>(rng.below(noise_range))
                     : successor_token(
                           prev, static_cast<int>(rng.below(kSuccessorsPerToken)),
                           noise_base, noise_range);
        tokens.push_back(vocab_token(tok));
        prev = tok;
    }
    // every record carries one signal token; off-probability draws plant a
    // misleading one from another class, so no input is evidence-free
    int signal_class = cls;
    if (!(rng.real() < p.signal_strength) && p.n_classes > 1)
        signal_class = (cls + 1 + static_cast<int>(rng.below(p.n_classes - 1))) %
                       p.n_classes;
    const int sig = signal_class * kSignalTokensPerClass +
                    static_cast<int>(rng.below(kSignalTokensPerClass));
    tokens[rng.below(tokens.size())] = vocab_token(sig);

    PromptRecord rec;
    rec.id = std::to_string(record_index + 1);
    rec.instruction = task.fixed_instruction;
    std::string input;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) input.push_back(' ');
        input += tokens[i];
    }
    rec.input = std::move(input);
    rec.response = task.labels[static_cast<std::size_t>(cls)];
    return rec;
}

}  // namespace

std::vector<std::string> synthetic_signal_tokens(const SynthParams& params,
                                                 int class_index) {
    if (class_index < 0 || class_index >= params.n_classes)
        throw Error("class index out of range");
    std::vector<std::string> out;
    for (int j = 0; j < kSignalTokensPerClass; ++j)
        out.push_back(vocab_token(class_index * kSignalTokensPerClass + j));
    return out;
}

Corpus make_synthetic_task(const SynthParams& params, std::uint64_t seed) {
    validate_synth(params);
    Corpus corpus;
    corpus.task = synth_task_spec(params);
    Rng rng = derive_rng(seed, "synth");
    corpus.records.reserve(static_cast<std::size_t>(params.n_records));
    for (int i = 0; i < params.n_records; ++i)
        corpus.records.push_back(synth_record(params, corpus.task, i, rng));
    return corpus;
}

Corpus make_synthetic_multimodal(const SynthParams& params,
                                 const SynthImageParams& img_params,
                                 std::uint64_t seed, const ImageStore& store) {
    validate_synth(params);
    if (img_params.image_size < 2) throw ConfigError("image_size must be >= 2");

    Corpus corpus;
    corpus.task = synth_task_spec(params);
    Rng rng = derive_rng(seed, "synth");
    Rng img_rng = derive_rng(seed, "synth-images");
    const int size = img_params.image_size;

    for (int i = 0; i < params.n_records; ++i) {
        PromptRecord rec = synth_record(params, corpus.task, i, rng);
        const int cls = static_cast<int>(
            std::find(corpus.task.labels.begin(), corpus.task.labels.end(),
                      rec.response) -
            corpus.task.labels.begin());

        // noisy raster with a weak class tint; the text carries the bulk of
        // the class signal, mirroring instruction-dominated multimodal tasks
        Image img(size, size);
        for (std::size_t px = 0; px < img.pixels.size(); px += 3) {
            for (int ch = 0; ch < 3; ++ch) {
                int v = 64 + static_cast<int>(img_rng.below(128));
                if (ch == cls % 3) v += img_params.class_tint;
                img.pixels[px + ch] =
                    static_cast<std::uint8_t>(std::clamp(v, 0, 255));
            }
        }
        rec.image = img_params.ref_prefix + rec.id;
        store.put(rec.image, std::move(img));
        corpus.records.push_back(std::move(rec));
    }
    return corpus;
}

}  // namespace cbw
