#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "stg/encoder.hpp"
#include "stg/textgraph.hpp"
#include "stg/vocab.hpp"

namespace stg {

enum class Provenance : std::uint8_t { bow = 0, fixed = 1, simteg = 2, simteg_full = 3 };

std::string provenance_name(Provenance p);
Provenance provenance_from_name(const std::string& name);

// Dense node-feature matrix: row i holds node i's embedding.
struct FeatureMatrix {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<float> x;  // row-major [n x d]
    Provenance provenance = Provenance::bow;
    std::array<std::uint8_t, 32> config_hash{};

    const float* row(std::size_t i) const { return x.data() + i * d; }
    float* row(std::size_t i) { return x.data() + i * d; }

    Tensor<float> as_tensor() const { return Tensor<float>::from_data({n, d}, x); }
};

// Cache file: magic "STGX", version u32, N u64, d u32, provenance u8,
// config-hash 32 bytes, then row-major 32-bit little-endian floats.
void cache_write(const std::string& path, const FeatureMatrix& fm);
FeatureMatrix cache_read(const std::string& path);

// L2-normalized term-frequency rows over the d_cap most frequent vocabulary
// tokens. Empty documents map to zero rows.
FeatureMatrix bow_features(const TextualGraph& graph, const Vocab& vocab, std::size_t d_cap);

// Deterministic full pass over all nodes in id order; X[i] is the pooled
// embedding of node i's text. Adapters must be merged beforehand and the
// model must be out of training mode.
FeatureMatrix extract_embeddings(const TextualGraph& graph, EncoderModel<float>& model,
                                 const Vocab& vocab, std::size_t batch_size);

}  // namespace stg
