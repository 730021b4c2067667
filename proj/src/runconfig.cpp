#include "stg/runconfig.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "stg/sha256.hpp"

namespace stg {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad numeric value for " + key + ": '" + value + "'");
    }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || p != value.data() + value.size())
        throw ConfigError("config: bad integer value for " + key + ": '" + value + "'");
    return v;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config: bad boolean value for " + key + ": '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

void RunConfig::apply(const std::string& section, const std::string& key,
                      const std::string& value) {
    auto unknown = [&]() -> ConfigError {
        return ConfigError("config: unknown key '" + (section.empty() ? key : section + "." + key) +
                           "'");
    };
    if (section.empty()) {
        if (key == "seed") seed = to_u64(key, value);
        else if (key == "task") {
            if (value != "nodecls" && value != "link")
                throw ConfigError("config: task must be nodecls or link");
            task = value;
        } else throw unknown();
        return;
    }
    if (section == "data") {
        if (key == "nodes") data.num_nodes = to_u64(key, value);
        else if (key == "classes") data.num_classes = static_cast<std::int32_t>(to_u64(key, value));
        else if (key == "intra_edge_prob") data.intra_edge_prob = to_double(key, value);
        else if (key == "inter_edge_prob") data.inter_edge_prob = to_double(key, value);
        else if (key == "semantic_correlation") data.semantic_correlation = to_double(key, value);
        else if (key == "words_per_doc") data.words_per_doc = to_u64(key, value);
        else if (key == "class_vocab_size") data.class_vocab_size = to_u64(key, value);
        else if (key == "shared_vocab_size") data.shared_vocab_size = to_u64(key, value);
        else if (key == "edge_valid_frac") data.edge_valid_frac = to_double(key, value);
        else if (key == "edge_test_frac") data.edge_test_frac = to_double(key, value);
        else if (key == "num_eval_negatives") data.num_eval_negatives = to_u64(key, value);
        else if (key == "min_freq") min_freq = to_u64(key, value);
        else throw unknown();
        return;
    }
    if (section == "encoder") {
        if (key == "d_model") encoder.d_model = to_u64(key, value);
        else if (key == "num_layers") encoder.num_layers = to_u64(key, value);
        else if (key == "num_heads") encoder.num_heads = to_u64(key, value);
        else if (key == "ffn_dim") encoder.ffn_dim = to_u64(key, value);
        else if (key == "max_len") {
            encoder.max_len = to_u64(key, value);
            stage1.max_len = encoder.max_len;
        } else if (key == "dropout") encoder.dropout_rate = to_double(key, value);
        else if (key == "pooling") {
            if (value == "mean") encoder.pooling = EncoderConfig::Pooling::mean;
            else if (value == "cls") encoder.pooling = EncoderConfig::Pooling::cls;
            else throw ConfigError("config: pooling must be mean or cls");
        } else if (key == "mlm_mask_rate") mlm_mask_rate = to_double(key, value);
        else if (key == "mlm_epochs") mlm_epochs = to_u64(key, value);
        else if (key == "mlm_learning_rate") mlm_learning_rate = to_double(key, value);
        else if (key == "mlm_batch_size") mlm_batch_size = to_u64(key, value);
        else throw unknown();
        return;
    }
    if (section == "lora") {
        if (key == "rank") stage1.lora.rank = to_u64(key, value);
        else if (key == "alpha") stage1.lora.alpha = to_double(key, value);
        else if (key == "dropout") stage1.lora.adapter_dropout = to_double(key, value);
        else if (key == "targets") stage1.lora.targets = split_list(value);
        else throw unknown();
        return;
    }
    if (section == "stage1") {
        if (key == "learning_rate") stage1.learning_rate = to_double(key, value);
        else if (key == "weight_decay") stage1.weight_decay = to_double(key, value);
        else if (key == "label_smoothing") stage1.label_smoothing = to_double(key, value);
        else if (key == "header_dropout") stage1.header_dropout = to_double(key, value);
        else if (key == "peft") {
            if (value == "lora") stage1.use_lora = true;
            else if (value == "full") stage1.use_lora = false;
            else throw ConfigError("config: peft must be lora or full");
        } else if (key == "epochs") stage1.epochs = to_u64(key, value);
        else if (key == "batch_size") stage1.batch_size = to_u64(key, value);
        else if (key == "link_pairs_per_epoch") stage1.link_pairs_per_epoch = to_u64(key, value);
        else if (key == "link_negatives_per_pos")
            stage1.link_negatives_per_pos = to_u64(key, value);
        else if (key == "link_head_hidden") stage1.link_head_hidden = to_u64(key, value);
        else throw unknown();
        return;
    }
    if (section == "gnn") {
        if (key == "arch") gnn.arch = gnn_arch_from_name(value);
        else if (key == "archs") {
            pipeline_archs.clear();
            for (auto& name : split_list(value)) pipeline_archs.push_back(gnn_arch_from_name(name));
            if (pipeline_archs.empty()) throw ConfigError("config: empty arch list");
        } else if (key == "num_layers") gnn.num_layers = to_u64(key, value);
        else if (key == "hidden_dim") gnn.hidden_dim = to_u64(key, value);
        else if (key == "dropout") gnn.dropout = to_double(key, value);
        else if (key == "learning_rate") gnn.learning_rate = to_double(key, value);
        else if (key == "weight_decay") gnn.weight_decay = to_double(key, value);
        else if (key == "label_smoothing") gnn.label_smoothing = to_double(key, value);
        else if (key == "epochs") gnn.epochs = to_u64(key, value);
        else if (key == "full_batch") gnn.full_batch = to_bool(key, value);
        else if (key == "batch_size") gnn.batch_size = to_u64(key, value);
        else if (key == "fanouts") {
            gnn.fanouts.clear();
            for (auto& f : split_list(value)) gnn.fanouts.push_back(to_u64(key, f));
        } else if (key == "link_head_hidden") gnn.link_head_hidden = to_u64(key, value);
        else throw unknown();
        return;
    }
    if (section == "eval") {
        if (key == "bow_dim") bow_dim = to_u64(key, value);
        else if (key == "projection_sample_per_class")
            projection_sample_per_class = to_u64(key, value);
        else if (key == "designate") {
            gnn_arch_from_name(value);  // validates
            designate_arch = value;
        } else throw unknown();
        return;
    }
    if (section == "hpo") {
        if (key == "lm_trials") hpo_lm_trials = to_u64(key, value);
        else if (key == "gnn_trials") hpo_gnn_trials = to_u64(key, value);
        else throw unknown();
        return;
    }
    throw ConfigError("config: unknown section '" + section + "'");
}

void RunConfig::validate() const {
    data.validate();
    if (encoder.d_model == 0 || encoder.num_heads == 0 ||
        encoder.d_model % encoder.num_heads != 0)
        throw ConfigError("config: encoder d_model must be divisible by num_heads");
    if (encoder.max_len < 2) throw ConfigError("config: encoder max_len must be at least 2");
    if (encoder.dropout_rate < 0.0 || encoder.dropout_rate >= 1.0)
        throw ConfigError("config: encoder dropout must be in [0, 1)");
    if (mlm_mask_rate <= 0.0 || mlm_mask_rate >= 1.0)
        throw ConfigError("config: mlm mask rate must be in (0, 1)");
    if (mlm_learning_rate <= 0.0) throw ConfigError("config: mlm learning rate must be positive");
    stage1.validate(link_task());
    gnn.validate();
    if (bow_dim == 0) throw ConfigError("config: bow_dim must be positive");
    if (hpo_lm_trials == 0 || hpo_gnn_trials == 0)
        throw ConfigError("config: trial budgets must be positive");
}

std::string RunConfig::canonical_string() const {
    std::ostringstream out;
    out.precision(17);
    out << "seed=" << seed << ";task=" << task << ";nodes=" << data.num_nodes
        << ";classes=" << data.num_classes << ";p=" << data.intra_edge_prob
        << ";q=" << data.inter_edge_prob << ";rho=" << data.semantic_correlation
        << ";words=" << data.words_per_doc << ";cvocab=" << data.class_vocab_size
        << ";svocab=" << data.shared_vocab_size << ";evf=" << data.edge_valid_frac
        << ";etf=" << data.edge_test_frac << ";negs=" << data.num_eval_negatives
        << ";minfreq=" << min_freq << ";d=" << encoder.d_model << ";L=" << encoder.num_layers
        << ";heads=" << encoder.num_heads << ";ffn=" << encoder.ffn_dim
        << ";maxlen=" << encoder.max_len << ";edrop=" << encoder.dropout_rate
        << ";pool=" << (encoder.pooling == EncoderConfig::Pooling::cls ? "cls" : "mean")
        << ";mlmrate=" << mlm_mask_rate << ";mlmep=" << mlm_epochs
        << ";mlmlr=" << mlm_learning_rate << ";mlmbs=" << mlm_batch_size
        << ";s1lr=" << stage1.learning_rate << ";s1wd=" << stage1.weight_decay
        << ";s1ls=" << stage1.label_smoothing << ";s1hd=" << stage1.header_dropout
        << ";peft=" << (stage1.use_lora ? "lora" : "full") << ";lr_r=" << stage1.lora.rank
        << ";lr_a=" << stage1.lora.alpha << ";lr_d=" << stage1.lora.adapter_dropout << ";lr_t=";
    for (auto& t : stage1.lora.targets) out << t << "+";
    out << ";s1ep=" << stage1.epochs << ";s1bs=" << stage1.batch_size
        << ";s1lpp=" << stage1.link_pairs_per_epoch << ";s1lnp=" << stage1.link_negatives_per_pos
        << ";s1lhh=" << stage1.link_head_hidden << ";garch=" << gnn_arch_name(gnn.arch)
        << ";glayers=" << gnn.num_layers << ";ghidden=" << gnn.hidden_dim
        << ";gdrop=" << gnn.dropout << ";glr=" << gnn.learning_rate << ";gwd=" << gnn.weight_decay
        << ";gls=" << gnn.label_smoothing << ";gep=" << gnn.epochs << ";gfb=" << gnn.full_batch
        << ";gbs=" << gnn.batch_size << ";gfan=";
    for (auto f : gnn.fanouts) out << f << "+";
    out << ";glhh=" << gnn.link_head_hidden << ";archs=";
    for (auto a : pipeline_archs) out << gnn_arch_name(a) << "+";
    out << ";bow=" << bow_dim << ";proj=" << projection_sample_per_class
        << ";designate=" << designate_arch << ";lmtr=" << hpo_lm_trials
        << ";gnntr=" << hpo_gnn_trials;
    return out.str();
}

std::string RunConfig::config_hash_hex() const { return Sha256::hex(canonical_string()); }

RunConfig parse_run_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) + ": bad section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        cfg.apply(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DependencyError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config_text(ss.str());
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must look like section.key=value: '" + assignment + "'");
    std::string path = trim(assignment.substr(0, eq));
    std::string value = trim(assignment.substr(eq + 1));
    auto dot = path.find('.');
    if (dot == std::string::npos)
        cfg.apply("", path, value);
    else
        cfg.apply(path.substr(0, dot), path.substr(dot + 1), value);
}

}  // namespace stg
