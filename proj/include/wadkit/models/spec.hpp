#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "wadkit/errors.hpp"

namespace wadkit {

enum class ModelKind { svm, mlp, lstm };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::svm: return "svm";
        case ModelKind::mlp: return "mlp";
        case ModelKind::lstm: return "lstm";
    }
    return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "svm") return ModelKind::svm;
    if (s == "mlp") return ModelKind::mlp;
    if (s == "lstm" || s == "rnn") return ModelKind::lstm;
    throw UsageError("unknown model kind '" + s + "' (expected svm, mlp or lstm)");
}

/// Architecture plus training hyper-parameters. Defaults reproduce the
/// published configuration: 57 inputs, MLP 64-64-8 ReLU, two 64-unit LSTM
/// layers over 30-frame windows; Adam at 1e-3, batch 32, <= 50 epochs,
/// early stopping with patience 5 on validation F1.
struct ModelSpec {
    ModelKind kind = ModelKind::lstm;
    std::size_t input_dim = 57;
    std::vector<std::size_t> mlp_layers{64, 64, 8};
    std::size_t lstm_layers = 2;
    std::size_t lstm_hidden = 64;
    std::size_t seq_len = 30;
    std::uint64_t seed = 1;

    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t epochs = 50;
    std::size_t patience = 5;
    double svm_lambda = 1e-4;
    std::size_t seq_stride = 1;  // stride between training windows (LSTM)
    bool class_weighting = false;
    std::string task = "wad";

    void validate() const {
        if (input_dim == 0) throw UsageError("input_dim must be positive");
        if (seq_len == 0) throw UsageError("seq_len must be >= 1");
        if (kind == ModelKind::lstm && (lstm_layers == 0 || lstm_hidden == 0))
            throw UsageError("LSTM needs at least one layer with positive width");
        for (auto w : mlp_layers)
            if (w == 0) throw UsageError("MLP layer widths must be positive");
        if (batch_size == 0) throw UsageError("batch_size must be positive");
        if (seq_stride == 0) throw UsageError("seq_stride must be positive");
    }
};

inline void to_json(nlohmann::json& j, const ModelSpec& s) {
    j = nlohmann::json{{"kind", to_string(s.kind)},
                       {"input_dim", s.input_dim},
                       {"mlp_layers", s.mlp_layers},
                       {"lstm_layers", s.lstm_layers},
                       {"lstm_hidden", s.lstm_hidden},
                       {"seq_len", s.seq_len},
                       {"seed", s.seed},
                       {"learning_rate", s.learning_rate},
                       {"batch_size", s.batch_size},
                       {"epochs", s.epochs},
                       {"patience", s.patience},
                       {"svm_lambda", s.svm_lambda},
                       {"seq_stride", s.seq_stride},
                       {"class_weighting", s.class_weighting},
                       {"task", s.task}};
}

inline void from_json(const nlohmann::json& j, ModelSpec& s) {
    s.kind = model_kind_from_string(j.at("kind").get<std::string>());
    j.at("input_dim").get_to(s.input_dim);
    j.at("mlp_layers").get_to(s.mlp_layers);
    j.at("lstm_layers").get_to(s.lstm_layers);
    j.at("lstm_hidden").get_to(s.lstm_hidden);
    j.at("seq_len").get_to(s.seq_len);
    j.at("seed").get_to(s.seed);
    j.at("learning_rate").get_to(s.learning_rate);
    j.at("batch_size").get_to(s.batch_size);
    j.at("epochs").get_to(s.epochs);
    j.at("patience").get_to(s.patience);
    j.at("svm_lambda").get_to(s.svm_lambda);
    j.at("seq_stride").get_to(s.seq_stride);
    j.at("class_weighting").get_to(s.class_weighting);
    j.at("task").get_to(s.task);
}

/// One named parameter block; blocks are stored column-major, back to back,
/// in declaration order.
struct ParamBlock {
    std::string name;
    std::size_t rows = 0, cols = 0, offset = 0;
    std::size_t size() const noexcept { return rows * cols; }
};

inline std::vector<ParamBlock> weight_layout(const ModelSpec& s) {
    std::vector<ParamBlock> out;
    std::size_t off = 0;
    auto add = [&](std::string name, std::size_t r, std::size_t c) {
        out.push_back({std::move(name), r, c, off});
        off += r * c;
    };
    switch (s.kind) {
        case ModelKind::svm:
            add("svm.weight", 1, s.input_dim);
            add("svm.bias", 1, 1);
            break;
        case ModelKind::mlp: {
            std::size_t in = s.input_dim;
            std::size_t l = 0;
            for (auto w : s.mlp_layers) {
                add("fc" + std::to_string(l) + ".weight", w, in);
                add("fc" + std::to_string(l) + ".bias", w, 1);
                in = w;
                ++l;
            }
            add("out.weight", 1, in);
            add("out.bias", 1, 1);
            break;
        }
        case ModelKind::lstm: {
            std::size_t in = s.input_dim;
            const std::size_t h = s.lstm_hidden;
            for (std::size_t l = 0; l < s.lstm_layers; ++l) {
                add("lstm" + std::to_string(l) + ".w_ih", 4 * h, in);
                add("lstm" + std::to_string(l) + ".w_hh", 4 * h, h);
                add("lstm" + std::to_string(l) + ".bias", 4 * h, 1);
                in = h;
            }
            add("out.weight", 1, h);
            add("out.bias", 1, 1);
            break;
        }
    }
    return out;
}

inline std::size_t weight_count(const ModelSpec& s) {
    auto layout = weight_layout(s);
    return layout.empty() ? 0 : layout.back().offset + layout.back().size();
}

/// Trained classifier: weights in f32, per-dimension standardisation and the
/// operating threshold (positive iff prob >= threshold).
struct Model {
    ModelSpec spec;
    std::vector<float> weights;
    std::vector<double> norm_mean;
    std::vector<double> norm_std;
    double threshold = 0.5;

    void validate() const {
        spec.validate();
        if (weights.size() != weight_count(spec))
            throw FormatError("weight count " + std::to_string(weights.size()) + " does not match spec (" +
                              std::to_string(weight_count(spec)) + ")");
        if (norm_mean.size() != spec.input_dim || norm_std.size() != spec.input_dim)
            throw FormatError("normalisation statistics do not match input_dim");
        for (double s : norm_std)
            if (!(s > 0.0)) throw FormatError("normalisation std must be positive");
        if (!(threshold > 0.0 && threshold < 1.0)) throw FormatError("threshold must lie in (0, 1)");
    }
};

}  // namespace wadkit
