#pragma once

// Hashed bag features over prompt components. Instruction tokens hash into
// buckets [0,B), input tokens into [B,2B); an image, when present, is
// downsampled to a g x g grid of mean channel intensities and hash-projected
// into [2B,3B). Every text token additionally hashes into a position-free
// range [3B,4B), giving the learner a component-blind view of the prompt
// alongside the tagged one. Pure and deterministic in the record.

#include <utility>
#include <vector>

#include "cbw/corpus.hpp"
#include "cbw/image.hpp"
#include "cbw/types.hpp"

namespace cbw {

// index/value pairs, strictly increasing in index
using SparseFeature = std::vector<std::pair<int, Scalar>>;

inline int feature_dim(int buckets) { return 4 * buckets; }

SparseFeature featurize_sparse(const PromptRecord& record, int buckets,
                               int grid, const ImageStore* store = nullptr);

// Same features with an explicitly supplied raster (used when scoring
// in-memory image variants).
SparseFeature featurize_sparse_with_image(const PromptRecord& record,
                                          const Image* image, int buckets,
                                          int grid);

// Dense counterpart of featurize_sparse.
Vec featurize(const PromptRecord& record, int buckets, int grid,
              const ImageStore* store = nullptr);

}  // namespace cbw
