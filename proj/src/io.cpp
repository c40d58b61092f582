#include "rbal/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rbal/errors.hpp"

namespace rbal {

namespace {

using nlohmann::json;

json parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("io: cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("io: malformed JSON in " + path + ": " + e.what());
    }
}

const json& field(const json& j, const char* key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end())
        throw ValidationError("io: missing field '" + std::string(key) + "' in " + path);
    return *it;
}

cd parse_complex(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ValidationError("io: expected [re, im] pair in " + where);
    return cd(j[0].get<double>(), j[1].get<double>());
}

json dump_complex(cd v) { return json::array({v.real(), v.imag()}); }

// json serializes doubles with a shortest round-trip representation, so
// values reload bit-exactly; nothing extra needed for the 17-digit contract

}  // namespace

SectionFrame load_sampled_variety(const std::string& path) {
    const json j = parse_file(path);
    SectionFrame fr;
    fr.level_k = field(j, "level_k", path).get<int>();
    fr.dim = field(j, "dim", path).get<int>();
    const int n = field(j, "n_coords", path).get<int>();
    fr.volume_V = field(j, "volume_V", path).get<double>();
    if (n < 1) throw ValidationError("io: n_coords must be >= 1 in " + path);

    const json& pts = field(j, "points", path);
    if (!pts.is_array() || pts.empty())
        throw ValidationError("io: 'points' must be a non-empty array in " + path);
    const int P = static_cast<int>(pts.size());
    const int n_params = static_cast<int>(field(pts[0], "params", path).size());

    fr.grid.n = n;
    fr.grid.params.resize(P, n_params);
    fr.grid.weights.resize(P);
    fr.Z.resize(P, fr.dim);
    fr.dZ.assign(n, Eigen::MatrixXcd(P, fr.dim));

    for (int p = 0; p < P; ++p) {
        const json& pt = pts[p];
        const std::string where = path + ", point " + std::to_string(p);
        const json& params = field(pt, "params", where);
        if (static_cast<int>(params.size()) != n_params)
            throw ValidationError("io: inconsistent params length in " + where);
        for (int a = 0; a < n_params; ++a) fr.grid.params(p, a) = params[a].get<double>();
        fr.grid.weights[p] = field(pt, "weight", where).get<double>();

        const json& z = field(pt, "z", where);
        if (static_cast<int>(z.size()) != fr.dim)
            throw ValidationError("io: z length does not match dim in " + where);
        for (int i = 0; i < fr.dim; ++i) fr.Z(p, i) = parse_complex(z[i], where);

        const json& dz = field(pt, "dz", where);
        if (static_cast<int>(dz.size()) != n)
            throw ValidationError("io: dz must have n_coords rows in " + where);
        for (int a = 0; a < n; ++a) {
            if (static_cast<int>(dz[a].size()) != fr.dim)
                throw ValidationError("io: dz row length does not match dim in " + where);
            for (int i = 0; i < fr.dim; ++i) fr.dZ[a](p, i) = parse_complex(dz[a][i], where);
        }
    }

    if (j.contains("torus_weights")) {
        const json& tw = j["torus_weights"];
        if (!tw.is_array() || static_cast<int>(tw.size()) != fr.dim)
            throw ValidationError("io: torus_weights must have one row per section in " + path);
        const int rank = tw.empty() ? 0 : static_cast<int>(tw[0].size());
        fr.torus_weights.resize(fr.dim, rank);
        for (int i = 0; i < fr.dim; ++i) {
            if (static_cast<int>(tw[i].size()) != rank)
                throw ValidationError("io: ragged torus_weights in " + path);
            for (int r = 0; r < rank; ++r) fr.torus_weights(i, r) = tw[i][r].get<int>();
        }
    }

    fr.validate();
    return fr;
}

void save_sampled_variety(const std::string& path, const SectionFrame& frame) {
    frame.validate();
    json j;
    j["level_k"] = frame.level_k;
    j["dim"] = frame.dim;
    j["n_coords"] = frame.grid.n;
    j["volume_V"] = frame.volume_V;
    json pts = json::array();
    for (int p = 0; p < frame.npts(); ++p) {
        json pt;
        json params = json::array();
        for (int a = 0; a < frame.grid.params.cols(); ++a) params.push_back(frame.grid.params(p, a));
        pt["params"] = std::move(params);
        pt["weight"] = frame.grid.weights[p];
        json z = json::array();
        for (int i = 0; i < frame.dim; ++i) z.push_back(dump_complex(frame.Z(p, i)));
        pt["z"] = std::move(z);
        json dz = json::array();
        for (int a = 0; a < frame.grid.n; ++a) {
            json row = json::array();
            for (int i = 0; i < frame.dim; ++i) row.push_back(dump_complex(frame.dZ[a](p, i)));
            dz.push_back(std::move(row));
        }
        pt["dz"] = std::move(dz);
        pts.push_back(std::move(pt));
    }
    j["points"] = std::move(pts);
    if (frame.torus_rank() > 0) {
        json tw = json::array();
        for (int i = 0; i < frame.dim; ++i) {
            json row = json::array();
            for (int r = 0; r < frame.torus_rank(); ++r) row.push_back(frame.torus_weights(i, r));
            tw.push_back(std::move(row));
        }
        j["torus_weights"] = std::move(tw);
    }
    atomic_write_text(path, j.dump(1));
}

InnerProduct load_inner_product(const std::string& path) {
    const json j = parse_file(path);
    InnerProduct H;
    H.level_k = field(j, "level_k", path).get<int>();
    const int d = field(j, "dim", path).get<int>();
    const json& rows = field(j, "entries", path);
    if (static_cast<int>(rows.size()) != d)
        throw ValidationError("io: entries row count does not match dim in " + path);
    H.H.resize(d, d);
    for (int i = 0; i < d; ++i) {
        if (static_cast<int>(rows[i].size()) != d)
            throw ValidationError("io: entries row " + std::to_string(i) + " has wrong length in " + path);
        for (int c = 0; c < d; ++c) H.H(i, c) = parse_complex(rows[i][c], path);
    }
    H.provenance = "file:" + path;
    H.validate();
    return H;
}

void save_inner_product(const std::string& path, const InnerProduct& H) {
    json j;
    j["level_k"] = H.level_k;
    j["dim"] = H.dim();
    json rows = json::array();
    for (int i = 0; i < H.dim(); ++i) {
        json row = json::array();
        for (int c = 0; c < H.dim(); ++c) row.push_back(dump_complex(H.H(i, c)));
        rows.push_back(std::move(row));
    }
    j["entries"] = std::move(rows);
    atomic_write_text(path, j.dump(1));
}

void atomic_write_text(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw ConfigError("io: cannot write " + tmp);
        out << content;
        if (!out.flush()) throw ConfigError("io: short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw ConfigError("io: cannot rename " + tmp + " to " + path);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ostringstream out;
    out.precision(17);
    for (std::size_t i = 0; i < header.size(); ++i)
        out << header[i] << (i + 1 < header.size() ? "," : "\n");
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw ValidationError("io: CSV row width does not match header");
        for (std::size_t i = 0; i < row.size(); ++i)
            out << row[i] << (i + 1 < row.size() ? "," : "\n");
    }
    atomic_write_text(path, out.str());
}

}  // namespace rbal
