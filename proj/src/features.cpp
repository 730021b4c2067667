#include "stg/features.hpp"

#include <cmath>

#include "stg/io_util.hpp"

namespace stg {

namespace {
constexpr std::uint32_t kVersion = 1;
}

std::string provenance_name(Provenance p) {
    switch (p) {
        case Provenance::bow: return "bow";
        case Provenance::fixed: return "fixed";
        case Provenance::simteg: return "simteg";
        case Provenance::simteg_full: return "simteg-full";
    }
    throw ValueError("provenance_name: bad tag");
}

Provenance provenance_from_name(const std::string& name) {
    if (name == "bow") return Provenance::bow;
    if (name == "fixed") return Provenance::fixed;
    if (name == "simteg") return Provenance::simteg;
    if (name == "simteg-full") return Provenance::simteg_full;
    throw ValueError("provenance_from_name: unknown provenance '" + name + "'");
}

void cache_write(const std::string& path, const FeatureMatrix& fm) {
    if (fm.x.size() != fm.n * fm.d) throw CacheError("cache_write: size does not match n*d");
    for (float v : fm.x)
        if (!std::isfinite(v)) throw CacheError("cache_write: non-finite feature value");
    std::vector<std::uint8_t> buf;
    buf.reserve(4 + 4 + 8 + 4 + 1 + 32 + fm.x.size() * 4);
    buf.insert(buf.end(), {'S', 'T', 'G', 'X'});
    put_u32(buf, kVersion);
    put_u64(buf, fm.n);
    put_u32(buf, static_cast<std::uint32_t>(fm.d));
    put_u8(buf, static_cast<std::uint8_t>(fm.provenance));
    buf.insert(buf.end(), fm.config_hash.begin(), fm.config_hash.end());
    for (float v : fm.x) put_f32(buf, v);
    atomic_write_bytes(path, buf);
}

FeatureMatrix cache_read(const std::string& path) {
    auto bytes = read_file_bytes(path);
    ByteReader r(bytes);
    r.need(4);
    if (!(bytes[0] == 'S' && bytes[1] == 'T' && bytes[2] == 'G' && bytes[3] == 'X'))
        throw CacheError("cache_read: bad magic in " + path);
    r.pos = 4;
    if (r.u32() != kVersion) throw CacheError("cache_read: unsupported version in " + path);
    FeatureMatrix fm;
    fm.n = r.u64();
    fm.d = r.u32();
    const std::uint8_t prov = r.u8();
    if (prov > 3) throw CacheError("cache_read: bad provenance tag");
    fm.provenance = static_cast<Provenance>(prov);
    r.need(32);
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos), 32, fm.config_hash.begin());
    r.pos += 32;
    fm.x.resize(fm.n * fm.d);
    for (auto& v : fm.x) {
        v = r.f32();
        if (!std::isfinite(v)) throw CacheError("cache_read: non-finite feature value");
    }
    if (!r.done()) throw CacheError("cache_read: trailing bytes in " + path);
    return fm;
}

FeatureMatrix bow_features(const TextualGraph& graph, const Vocab& vocab, std::size_t d_cap) {
    const std::size_t usable =
        static_cast<std::size_t>(vocab.size()) - static_cast<std::size_t>(Vocab::kNumSpecial);
    const std::size_t d = std::min(d_cap, usable);
    FeatureMatrix fm;
    fm.n = graph.num_nodes();
    fm.d = d;
    fm.provenance = Provenance::bow;
    fm.x.assign(fm.n * d, 0.0f);
    // vocabulary ids are frequency-ordered, so the cap is ids [4, 4+d)
    for (std::size_t i = 0; i < fm.n; ++i) {
        float* row = fm.row(i);
        for (const auto& w : split_words(graph.texts[i])) {
            const std::int32_t id = vocab.lookup(w);
            if (id < Vocab::kNumSpecial) continue;
            const std::size_t col = static_cast<std::size_t>(id - Vocab::kNumSpecial);
            if (col < d) row[col] += 1.0f;
        }
        double norm = 0.0;
        for (std::size_t j = 0; j < d; ++j) norm += static_cast<double>(row[j]) * row[j];
        if (norm > 0.0) {
            const float inv = static_cast<float>(1.0 / std::sqrt(norm));
            for (std::size_t j = 0; j < d; ++j) row[j] *= inv;
        }
    }
    return fm;
}

FeatureMatrix extract_embeddings(const TextualGraph& graph, EncoderModel<float>& model,
                                 const Vocab& vocab, std::size_t batch_size) {
    if (model.lora_wrapped)
        throw StateError("extract_embeddings: merge adapters before extraction");
    if (model.training_mode) throw StateError("extract_embeddings: model is in training mode");
    FeatureMatrix fm;
    fm.n = graph.num_nodes();
    fm.d = model.cfg.d_model;
    fm.provenance = Provenance::simteg;
    fm.x.assign(fm.n * fm.d, 0.0f);

    std::vector<std::int64_t> ids(fm.n);
    for (std::size_t i = 0; i < fm.n; ++i) ids[i] = static_cast<std::int64_t>(i);
    NoGradScope<float> inference;
    for (const auto& batch : batch_texts(graph, ids, vocab, model.cfg.max_len, batch_size)) {
        Tensor<float> pooled;
        try {
            pooled = encode_batch(model, batch, false);
        } catch (const ValueError& e) {
            throw ValueError(std::string("extract_embeddings: node ") +
                             std::to_string(batch.node_ids[0]) + ": " + e.what());
        }
        for (std::size_t bi = 0; bi < batch.batch_size; ++bi)
            std::copy_n(pooled.data().data() + bi * fm.d, fm.d,
                        fm.row(static_cast<std::size_t>(batch.node_ids[bi])));
    }
    return fm;
}

}  // namespace stg
