#include "ngpbo/checkpoint.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "ngpbo/rng.hpp"

namespace ngpbo {

using nlohmann::json;

std::string bytes_digest(const std::string& bytes) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(bytes);
    return os.str();
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for digest");
    std::ostringstream buf;
    buf << in.rdbuf();
    return bytes_digest(buf.str());
}

namespace {

json arch_to_json(const MlpArch& a) {
    return json{{"layer_sizes", a.layer_sizes}, {"activation", to_string(a.activation)}};
}

MlpArch arch_from_json(const json& j) {
    MlpArch a;
    a.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    a.activation = activation_from_string(j.at("activation").get<std::string>());
    a.validate();
    return a;
}

} // namespace

json params_to_json(const MlpParams& p) {
    json j;
    j["arch"] = arch_to_json(p.arch);
    json weights = json::array();
    json biases = json::array();
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        // Row-major flattening per layer.
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(p.weights[l].size()));
        for (Eigen::Index i = 0; i < p.weights[l].rows(); ++i)
            for (Eigen::Index c = 0; c < p.weights[l].cols(); ++c) w.push_back(p.weights[l](i, c));
        weights.push_back(w);
        biases.push_back(std::vector<double>(p.biases[l].data(), p.biases[l].data() + p.biases[l].size()));
    }
    j["weights"] = std::move(weights);
    j["biases"] = std::move(biases);
    return j;
}

MlpParams params_from_json(const json& j) {
    MlpParams p;
    p.arch = arch_from_json(j.at("arch"));
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (static_cast<int>(weights.size()) != p.arch.num_weight_layers() || biases.size() != weights.size())
        throw ConfigError("checkpoint: layer count mismatch");
    for (int l = 0; l < p.arch.num_weight_layers(); ++l) {
        const int rows = p.arch.layer_sizes[l + 1];
        const int cols = p.arch.layer_sizes[l];
        const auto w = weights[l].get<std::vector<double>>();
        if (static_cast<int>(w.size()) != rows * cols)
            throw ConfigError("checkpoint: weight layer " + std::to_string(l) + " has wrong length");
        Eigen::MatrixXd wm(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int c = 0; c < cols; ++c) wm(i, c) = w[static_cast<std::size_t>(i) * cols + c];
        const auto b = biases[l].get<std::vector<double>>();
        if (static_cast<int>(b.size()) != rows)
            throw ConfigError("checkpoint: bias layer " + std::to_string(l) + " has wrong length");
        p.weights.push_back(std::move(wm));
        p.biases.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), rows));
    }
    p.validate();
    return p;
}

json model_to_json(const NgpModel& model, const json& training_meta) {
    const auto& c = model.config;
    json j;
    j["config"] = {{"use_descriptor", c.use_descriptor},
                   {"use_mean_net", c.use_mean_net},
                   {"use_embed_net", c.use_embed_net},
                   {"feature_dim", c.feature_dim},
                   {"descriptor_dim", c.descriptor_dim},
                   {"mean_arch", arch_to_json(c.mean_arch)},
                   {"embed_arch", arch_to_json(c.embed_arch)},
                   {"kernel", to_string(c.kernel)},
                   {"learn_amplitude", c.learn_amplitude}};
    j["mean_params"] = c.use_mean_net ? params_to_json(model.mean_params) : json(nullptr);
    j["embed_params"] = c.use_embed_net ? params_to_json(model.embed_params) : json(nullptr);
    j["kernel_params"] = {{"log_amplitude", model.kernel_params.log_amplitude},
                          {"log_lengthscale", model.kernel_params.log_lengthscale},
                          {"kind", to_string(model.kernel_params.kind)}};
    j["log_noise_variance"] = model.log_noise_variance;
    j["training_meta"] = training_meta.is_null() ? json::object() : training_meta;
    return j;
}

NgpModel model_from_json(const json& j, json* training_meta) {
    NgpModel m;
    const auto& jc = j.at("config");
    m.config.use_descriptor = jc.at("use_descriptor").get<bool>();
    m.config.use_mean_net = jc.at("use_mean_net").get<bool>();
    m.config.use_embed_net = jc.at("use_embed_net").get<bool>();
    m.config.feature_dim = jc.at("feature_dim").get<int>();
    m.config.descriptor_dim = jc.at("descriptor_dim").get<int>();
    m.config.mean_arch = arch_from_json(jc.at("mean_arch"));
    m.config.embed_arch = arch_from_json(jc.at("embed_arch"));
    m.config.kernel = kernel_kind_from_string(jc.at("kernel").get<std::string>());
    m.config.learn_amplitude = jc.value("learn_amplitude", true);
    m.config.validate();

    if (m.config.use_mean_net) m.mean_params = params_from_json(j.at("mean_params"));
    if (m.config.use_embed_net) m.embed_params = params_from_json(j.at("embed_params"));
    const auto& jk = j.at("kernel_params");
    m.kernel_params.log_amplitude = jk.at("log_amplitude").get<double>();
    m.kernel_params.log_lengthscale = jk.at("log_lengthscale").get<double>();
    m.kernel_params.kind = kernel_kind_from_string(jk.at("kind").get<std::string>());
    m.log_noise_variance = j.at("log_noise_variance").get<double>();
    if (training_meta) *training_meta = j.value("training_meta", json::object());
    return m;
}

void save_model(const NgpModel& model, const std::string& path, const json& training_meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << model_to_json(model, training_meta).dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

NgpModel load_model(const std::string& path, json* training_meta) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("checkpoint '" + path + "': invalid JSON: " + e.what());
    }
    try {
        return model_from_json(j, training_meta);
    } catch (const json::exception& e) {
        throw ConfigError("checkpoint '" + path + "': " + e.what());
    }
}

} // namespace ngpbo
