#include "prereq/common.hpp"
#include "prereq/serialize.hpp"

#include <fstream>

namespace prereq {

std::string casefold(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

bool all_finite(const Matrix& m) {
    return m.allFinite();
}

Json matrix_to_json(const Matrix& m) {
    Json data = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    }
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const Json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols)) {
        throw Error("matrix json: data length does not match shape");
    }
    Matrix m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
    }
    return m;
}

Json make_checkpoint(std::string_view kind, Json payload) {
    return Json{{"format", std::string(kind)}, {"version", kCheckpointVersion}, {"payload", std::move(payload)}};
}

const Json& open_checkpoint(const Json& container, std::string_view kind) {
    if (!container.contains("format") || container.at("format") != kind) {
        throw Error("checkpoint: expected format '" + std::string(kind) + "'");
    }
    if (container.value("version", 0) != kCheckpointVersion) {
        throw Error("checkpoint: unsupported version " + container.value("version", Json()).dump());
    }
    return container.at("payload");
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw Error("invalid JSON in " + path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const Json& j, int indent) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(indent) << '\n';
}

}  // namespace prereq
