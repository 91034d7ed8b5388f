#include "xrfm/model_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace xrfm {

using nlohmann::json;

namespace detail {

namespace {
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}
} // namespace

std::string base64_encode(const unsigned char* data, std::size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (std::size_t i = 0; i < len; i += 3) {
        const unsigned b0 = data[i];
        const unsigned b1 = i + 1 < len ? data[i + 1] : 0;
        const unsigned b2 = i + 2 < len ? data[i + 2] : 0;
        out.push_back(kAlphabet[b0 >> 2]);
        out.push_back(kAlphabet[((b0 & 0x3) << 4) | (b1 >> 4)]);
        out.push_back(i + 1 < len ? kAlphabet[((b1 & 0xf) << 2) | (b2 >> 6)] : '=');
        out.push_back(i + 2 < len ? kAlphabet[b2 & 0x3f] : '=');
    }
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
    if (text.size() % 4 != 0) throw FormatError("base64: length must be a multiple of 4");
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int v[4] = {0, 0, 0, 0};
        int pads = 0;
        for (int k = 0; k < 4; ++k) {
            const char c = text[i + k];
            if (c == '=') {
                ++pads;
                continue;
            }
            v[k] = decode_char(c);
            if (v[k] < 0) throw FormatError("base64: invalid character");
        }
        out.push_back(static_cast<unsigned char>((v[0] << 2) | (v[1] >> 4)));
        if (pads < 2) out.push_back(static_cast<unsigned char>(((v[1] & 0xf) << 4) | (v[2] >> 2)));
        if (pads < 1) out.push_back(static_cast<unsigned char>(((v[2] & 0x3) << 6) | v[3]));
    }
    return out;
}

std::string doubles_to_base64(const double* data, std::size_t count) {
    // Little-endian IEEE doubles; byte order asserted at build time below.
    static_assert(sizeof(double) == 8);
    return base64_encode(reinterpret_cast<const unsigned char*>(data), count * sizeof(double));
}

std::vector<double> base64_to_doubles(const std::string& text) {
    std::vector<unsigned char> bytes = base64_decode(text);
    if (bytes.size() % sizeof(double) != 0)
        throw FormatError("model file: float array has a partial value");
    std::vector<double> out(bytes.size() / sizeof(double));
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

} // namespace detail

// ============================================================================
// serialization
// ============================================================================

namespace {

json matrix_to_json(const Matrix& m) {
    return json{{"rows", m.rows()},
                {"cols", m.cols()},
                {"data", detail::doubles_to_base64(m.data(), m.rows() * m.cols())}};
}

Matrix matrix_from_json(const json& j) {
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    std::vector<double> data = detail::base64_to_doubles(j.at("data").get<std::string>());
    if (data.size() != m.rows() * m.cols())
        throw FormatError("model file: matrix payload size mismatch");
    std::memcpy(m.data(), data.data(), data.size() * sizeof(double));
    return m;
}

json vector_to_json(const std::vector<double>& v) {
    return detail::doubles_to_base64(v.data(), v.size());
}

std::vector<double> vector_from_json(const json& j) {
    return detail::base64_to_doubles(j.get<std::string>());
}

json kernel_to_json(const KernelSpec& spec) {
    return json{{"p", spec.p},
                {"q_mode", spec.q_mode == QMode::euclidean ? "euclidean" : "product"},
                {"bandwidth", spec.bandwidth},
                {"bandwidth_mode",
                 spec.bandwidth_mode == BandwidthMode::constant ? "constant" : "adaptive"},
                {"adaptive_literal", spec.adaptive_literal}};
}

KernelSpec kernel_from_json(const json& j) {
    KernelSpec spec;
    spec.p = j.at("p").get<double>();
    spec.q_mode = j.at("q_mode").get<std::string>() == "product" ? QMode::product
                                                                 : QMode::euclidean;
    spec.bandwidth = j.at("bandwidth").get<double>();
    spec.bandwidth_mode = j.at("bandwidth_mode").get<std::string>() == "adaptive"
                              ? BandwidthMode::adaptive
                              : BandwidthMode::constant;
    spec.adaptive_literal = j.value("adaptive_literal", false);
    return spec;
}

void flatten_nodes(const TreeNode* node, std::vector<json>& out) {
    const std::size_t id = out.size();
    out.emplace_back();
    if (node->is_leaf()) {
        if (!node->model) throw Error("save_model: tree has unfitted leaves");
        const LeafModel& m = *node->model;
        json leaf{{"kernel", kernel_to_json(m.kernel)},
                  {"diagonal", m.diagonal},
                  {"alpha", matrix_to_json(m.alpha)},
                  {"x_train", matrix_to_json(m.x_train)},
                  {"best_iteration", m.best_iteration},
                  {"best_val_error", m.best_val_error}};
        if (m.diagonal) {
            leaf["diag_transform"] = vector_to_json(m.diag_transform);
            leaf["feature_diag"] = vector_to_json(m.feature_diag);
        } else {
            leaf["transform"] = matrix_to_json(m.transform);
            leaf["feature_matrix"] = matrix_to_json(m.feature_matrix);
        }
        out[id] = json{{"leaf", std::move(leaf)}};
        return;
    }
    json internal{{"v", vector_to_json(node->split_vector)}, {"threshold", node->threshold}};
    const std::size_t left_id = out.size();
    flatten_nodes(node->left.get(), out);
    const std::size_t right_id = out.size();
    flatten_nodes(node->right.get(), out);
    internal["left"] = left_id;
    internal["right"] = right_id;
    out[id] = json{{"internal", std::move(internal)}};
}

std::unique_ptr<TreeNode> rebuild_node(const std::vector<json>& nodes, std::size_t id,
                                       std::uint64_t path) {
    if (id >= nodes.size()) throw FormatError("model file: node id out of range");
    auto node = std::make_unique<TreeNode>();
    node->path = path;
    const json& j = nodes[id];
    if (j.contains("leaf")) {
        const json& leaf = j.at("leaf");
        LeafModel m;
        m.kernel = kernel_from_json(leaf.at("kernel"));
        m.diagonal = leaf.at("diagonal").get<bool>();
        m.alpha = matrix_from_json(leaf.at("alpha"));
        m.x_train = matrix_from_json(leaf.at("x_train"));
        m.best_iteration = leaf.at("best_iteration").get<int>();
        m.best_val_error = leaf.at("best_val_error").get<double>();
        if (m.diagonal) {
            m.diag_transform = vector_from_json(leaf.at("diag_transform"));
            m.feature_diag = vector_from_json(leaf.at("feature_diag"));
        } else {
            m.transform = matrix_from_json(leaf.at("transform"));
            m.feature_matrix = matrix_from_json(leaf.at("feature_matrix"));
        }
        node->model = std::move(m);
        return node;
    }
    const json& internal = j.at("internal");
    node->split_vector = vector_from_json(internal.at("v"));
    node->threshold = internal.at("threshold").get<double>();
    node->left = rebuild_node(nodes, internal.at("left").get<std::size_t>(), path * 2);
    node->right = rebuild_node(nodes, internal.at("right").get<std::size_t>(), path * 2 + 1);
    return node;
}

json prep_to_json(const Preprocess& prep) {
    json cols = json::array();
    for (const auto& col : prep.schema)
        cols.push_back(json{{"name", col.name},
                            {"kind", col.kind == ColumnKind::numeric ? "numeric" : "categorical"},
                            {"vocabulary", col.vocabulary}});
    json spans = json::array();
    for (const auto& s : prep.spans) spans.push_back(json::array({s.begin, s.end, s.source}));
    return json{{"transform", prep.transform == CatTransform::one_hot ? "one_hot" : "ordinal"},
                {"standardized", prep.standardized},
                {"columns", std::move(cols)},
                {"mean", vector_to_json(prep.stats.mean)},
                {"std", vector_to_json(prep.stats.std)},
                {"spans", std::move(spans)},
                {"encoded_dim", prep.encoded_dim},
                {"class_names", prep.class_names},
                {"target_name", prep.target_name}};
}

Preprocess prep_from_json(const json& j) {
    Preprocess prep;
    prep.transform = j.at("transform").get<std::string>() == "ordinal" ? CatTransform::ordinal
                                                                       : CatTransform::one_hot;
    prep.standardized = j.at("standardized").get<bool>();
    for (const auto& col : j.at("columns")) {
        ColumnSchema schema;
        schema.name = col.at("name").get<std::string>();
        schema.kind = col.at("kind").get<std::string>() == "categorical" ? ColumnKind::categorical
                                                                         : ColumnKind::numeric;
        schema.vocabulary = col.at("vocabulary").get<std::vector<std::string>>();
        prep.schema.push_back(std::move(schema));
    }
    prep.stats.mean = vector_from_json(j.at("mean"));
    prep.stats.std = vector_from_json(j.at("std"));
    for (const auto& s : j.at("spans"))
        prep.spans.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>(),
                              s.at(2).get<std::size_t>()});
    prep.encoded_dim = j.at("encoded_dim").get<std::size_t>();
    prep.class_names = j.at("class_names").get<std::vector<std::string>>();
    prep.target_name = j.value("target_name", std::string{});
    return prep;
}

} // namespace

std::string model_to_string(const XRFMModel& model) {
    if (!model.root) throw Error("save_model: empty model");
    std::vector<json> nodes;
    flatten_nodes(model.root.get(), nodes);
    json doc{{"format", "xrfm/1"},
             {"task", model.task == TaskKind::regression ? "regression" : "classification"},
             {"dim", model.dim},
             {"preprocessing", prep_to_json(model.prep)},
             {"nodes", nodes}};
    return doc.dump();
}

XRFMModel model_from_string(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("model file: invalid JSON: ") + e.what());
    }
    if (!doc.contains("format") || !doc.at("format").is_string() ||
        doc.at("format").get<std::string>() != "xrfm/1")
        throw FormatError("model file: unknown format tag (expected xrfm/1)");

    XRFMModel model;
    model.task = doc.at("task").get<std::string>() == "classification" ? TaskKind::classification
                                                                       : TaskKind::regression;
    model.dim = doc.at("dim").get<std::size_t>();
    model.prep = prep_from_json(doc.at("preprocessing"));
    const std::vector<json> nodes = doc.at("nodes").get<std::vector<json>>();
    if (nodes.empty()) throw FormatError("model file: no nodes");
    model.root = rebuild_node(nodes, 0, 1);
    return model;
}

void save_model(const XRFMModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("save_model: cannot open " + path);
    out << model_to_string(model);
    if (!out) throw Error("save_model: write failed for " + path);
}

XRFMModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("load_model: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return model_from_string(buf.str());
}

} // namespace xrfm
