#pragma once

// Composite triggers: per-component trigger keys, the attack target, and the
// insertion machinery — token insertion for text components, a centered patch
// stamp for image components, and placement maps that route keys to
// components (including deliberately misplaced routings).

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cbw/corpus.hpp"
#include "cbw/image.hpp"
#include "cbw/rng.hpp"

namespace cbw {

enum class Component { instruction, input, image };
enum class KeyId { instruction_key, input_key, image_key };

std::string to_string(Component c);
std::string to_string(KeyId k);

struct AttackTarget {
    enum class Kind { label, sentence };
    Kind kind = Kind::label;
    std::string value;

    void validate(const TaskSpec& task) const;
};

struct PatchSpec {
    std::array<std::uint8_t, 3> color = {255, 0, 0};
    int fraction = 16;  // side length = max(1, floor(min(h,w)/fraction))
};

struct CompositeTrigger {
    std::string instruction_key;           // single token
    std::string input_key;                 // single token; empty if multimodal
    std::optional<PatchSpec> image_patch;  // set for multimodal triggers
    AttackTarget target;

    bool multimodal() const { return image_patch.has_value(); }
    int component_count() const { return 2; }
    void validate(const TaskSpec& task) const;
};

// Routes keys to destination components. A component may receive zero, one,
// or both text keys; entries are applied in KeyId order (instruction key
// first), each at an independent gap of the then-current text.
struct PlacementMap {
    std::vector<std::pair<KeyId, Component>> entries;

    bool empty() const { return entries.empty(); }
    static PlacementMap correct_for(const CompositeTrigger& trigger);
};

// Inserts key at one of the L+1 token gaps of an L-token text (uniform when
// gap is nullopt); output is tokenizer-normalized with single-space joins.
std::string insert_text_key(std::string_view text, std::string_view key,
                            std::optional<std::size_t> gap, Rng& rng);

// Paints a color square of side max(1, floor(min(h,w)/fraction)) whose
// top-left corner sits at (floor(w/2) - floor(s/2), floor(h/2) - floor(s/2)).
// Idempotent; every other pixel is untouched.
Image stamp_image_patch(const Image& image, const PatchSpec& spec);

// Applies each routed key: text keys inserted at independent uniform gaps,
// image keys stamped via the store. The response is never modified; id and
// meta are preserved and provenance tags (placement, inserted keys, final
// token positions) are added to meta.
PromptRecord apply_placement(const PromptRecord& record,
                             const CompositeTrigger& trigger,
                             const PlacementMap& placement, Rng& rng,
                             const ImageStore* store = nullptr);

// Meta keys written by apply_placement.
inline constexpr const char* kMetaPlacement = "placement";
inline constexpr const char* kMetaKeysInstruction = "keys.instruction";
inline constexpr const char* kMetaKeysInput = "keys.input";
inline constexpr const char* kMetaPosInstruction = "pos.instruction";
inline constexpr const char* kMetaPosInput = "pos.input";
inline constexpr const char* kMetaImageStamped = "image.stamped";

}  // namespace cbw
