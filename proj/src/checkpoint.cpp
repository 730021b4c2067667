#include "stg/checkpoint.hpp"

#include <array>

#include "stg/io_util.hpp"

namespace stg {

namespace {

constexpr std::uint32_t kVersion = 1;
constexpr std::array<const char*, 6> kTargetNames = {"q", "k", "v", "o", "ffn1", "ffn2"};

std::uint8_t target_code(const std::string& name) {
    for (std::size_t i = 0; i < kTargetNames.size(); ++i)
        if (name == kTargetNames[i]) return static_cast<std::uint8_t>(i);
    throw CacheError("checkpoint: unknown adapter target '" + name + "'");
}

void put_f64(std::vector<std::uint8_t>& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(buf, bits);
}

double get_f64(ByteReader& r) {
    std::uint64_t bits = r.u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_blob(std::vector<std::uint8_t>& buf, const Tensor<float>& t) {
    put_u64(buf, t.numel());
    for (float v : t.data()) put_f32(buf, v);
}

void get_blob(ByteReader& r, Tensor<float>& t) {
    const std::uint64_t n = r.u64();
    if (n != t.numel()) throw CacheError("checkpoint: blob size mismatch");
    for (std::size_t i = 0; i < n; ++i) t.data()[i] = r.f32();
}

}  // namespace

void save_encoder(const std::string& path, EncoderModel<float>& model) {
    std::vector<std::uint8_t> buf;
    buf.insert(buf.end(), {'S', 'T', 'G', 'M'});
    put_u32(buf, kVersion);
    const EncoderConfig& cfg = model.cfg;
    put_u32(buf, static_cast<std::uint32_t>(cfg.d_model));
    put_u32(buf, static_cast<std::uint32_t>(cfg.num_layers));
    put_u32(buf, static_cast<std::uint32_t>(cfg.num_heads));
    put_u32(buf, static_cast<std::uint32_t>(cfg.ffn_dim));
    put_u32(buf, static_cast<std::uint32_t>(cfg.max_len));
    put_u32(buf, static_cast<std::uint32_t>(cfg.vocab_size));
    put_f64(buf, cfg.dropout_rate);
    put_u8(buf, cfg.pooling == EncoderConfig::Pooling::cls ? 1 : 0);

    // base blobs in registry order
    for (auto& ref : model.registry())
        if (ref.name.find(".lora_") == std::string::npos) put_blob(buf, ref.tensor);

    put_u8(buf, model.lora_wrapped ? 1 : 0);
    if (model.lora_wrapped) {
        // recover the adapter config from the first wrapped projection
        std::vector<std::string> targets;
        std::size_t rank = 0;
        double dropout = 0.0, scaling = 1.0;
        auto& first = model.layers.front();
        for (const char* name : kTargetNames) {
            Linear<float>* proj = detail::select_projection(first, name);
            if (proj->adapter) {
                targets.push_back(name);
                rank = proj->adapter->a.dim(1);
                dropout = proj->adapter->dropout_rate;
                scaling = static_cast<double>(proj->adapter->scaling);
            }
        }
        put_u32(buf, static_cast<std::uint32_t>(rank));
        put_f64(buf, scaling * static_cast<double>(rank));  // alpha
        put_f64(buf, dropout);
        put_u32(buf, static_cast<std::uint32_t>(targets.size()));
        for (auto& t : targets) put_u8(buf, target_code(t));
        for (auto& layer : model.layers)
            for (auto& t : targets) {
                Linear<float>* proj = detail::select_projection(layer, t);
                put_blob(buf, proj->adapter->a);
                put_blob(buf, proj->adapter->b);
            }
    }
    atomic_write_bytes(path, buf);
}

EncoderModel<float> load_encoder(const std::string& path) {
    auto bytes = read_file_bytes(path);
    ByteReader r(bytes);
    r.need(4);
    if (!(bytes[0] == 'S' && bytes[1] == 'T' && bytes[2] == 'G' && bytes[3] == 'M'))
        throw CacheError("checkpoint: bad magic in " + path);
    r.pos = 4;
    if (r.u32() != kVersion) throw CacheError("checkpoint: unsupported version in " + path);

    EncoderConfig cfg;
    cfg.d_model = r.u32();
    cfg.num_layers = r.u32();
    cfg.num_heads = r.u32();
    cfg.ffn_dim = r.u32();
    cfg.max_len = r.u32();
    cfg.vocab_size = r.u32();
    cfg.dropout_rate = get_f64(r);
    cfg.pooling = r.u8() == 1 ? EncoderConfig::Pooling::cls : EncoderConfig::Pooling::mean;

    RngState scratch(0);  // every value is overwritten from the blobs
    auto model = EncoderModel<float>::init(cfg, scratch);
    for (auto& ref : model.registry()) get_blob(r, ref.tensor);

    if (r.u8() == 1) {
        LoraConfig lcfg;
        lcfg.rank = r.u32();
        lcfg.alpha = get_f64(r);
        lcfg.adapter_dropout = get_f64(r);
        const std::uint32_t n_targets = r.u32();
        lcfg.targets.clear();
        for (std::uint32_t i = 0; i < n_targets; ++i) {
            std::uint8_t code = r.u8();
            if (code >= kTargetNames.size()) throw CacheError("checkpoint: bad target code");
            lcfg.targets.push_back(kTargetNames[code]);
        }
        RngState wrap_scratch(0);
        lora_wrap(model, lcfg, wrap_scratch);
        for (auto& layer : model.layers)
            for (auto& t : lcfg.targets) {
                Linear<float>* proj = detail::select_projection(layer, t);
                get_blob(r, proj->adapter->a);
                get_blob(r, proj->adapter->b);
            }
    }
    if (!r.done()) throw CacheError("checkpoint: trailing bytes in " + path);
    return model;
}

}  // namespace stg
