#pragma once

// Prompt-structured corpora (instruction / input / response, optional image)
// for classification and generation tasks: JSONL load/save, holdout splits,
// and seeded synthetic task generation. Corpus values are immutable after
// construction; every operation is pure given its seed.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cbw/image.hpp"

namespace cbw {

enum class TaskKind { classification, generation };

struct TaskSpec {
    std::string name;
    TaskKind kind = TaskKind::classification;
    std::vector<std::string> labels;   // classification only; ordered, unique
    std::string fixed_instruction;     // optional

    bool has_label(const std::string& label) const;
    void validate() const;
};

struct PromptRecord {
    std::string id;
    std::string instruction;
    std::string input;      // may be empty
    std::string response;
    std::string image;      // image reference; empty for text-only records
    std::map<std::string, std::string> meta;

    bool multimodal() const { return !image.empty(); }
    bool operator==(const PromptRecord&) const = default;
};

struct Corpus {
    TaskSpec task;
    std::vector<PromptRecord> records;

    std::size_t size() const { return records.size(); }
    // Checks id uniqueness and, for classification, label membership.
    void validate() const;
};

// One JSON object per line: {"id"?, "instruction", "input", "output",
// "image"?, "meta"?}; "output" maps to the response field. Missing ids are
// assigned from 1-based line numbers.
Corpus load_corpus(const std::filesystem::path& path, const TaskSpec& task);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Samples n_test records without replacement, uniformly under seed. Both
// halves keep the original record order.
std::pair<Corpus, Corpus> split_holdout(const Corpus& corpus,
                                        std::size_t n_test,
                                        std::uint64_t seed);

struct SynthParams {
    int n_classes = 6;
    int n_records = 5000;
    int vocab_size = 2000;
    int tokens_per_field = 16;
    double signal_strength = 0.9;
};

// Classification corpus where each class owns a few signal tokens that show
// up in the input with probability signal_strength; at signal_strength 1 a
// token-lookup rule classifies the corpus perfectly.
Corpus make_synthetic_task(const SynthParams& params, std::uint64_t seed);

// Signal tokens assigned to a class by make_synthetic_task (exposed so tests
// and oracles can build the lookup rule).
std::vector<std::string> synthetic_signal_tokens(const SynthParams& params,
                                                 int class_index);

struct SynthImageParams {
    int image_size = 64;     // square, pixels
    int class_tint = 24;     // per-class mean shift, weak next to text signal
    std::string ref_prefix = "mem:";
};

// Multimodal variant: same text construction plus one raster per record,
// injected into the store under "<ref_prefix><id>".
Corpus make_synthetic_multimodal(const SynthParams& params,
                                 const SynthImageParams& img_params,
                                 std::uint64_t seed, const ImageStore& store);

}  // namespace cbw
