#include "splatsim/ply_io.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace splatsim {

namespace {

// SH band-0 basis constant; color = 0.5 + kShC0 * f_dc.
constexpr double kShC0 = 0.28209479177387814;

constexpr const char* kRequired[] = {
    "x", "y", "z", "scale_0", "scale_1", "scale_2",
    "rot_0", "rot_1", "rot_2", "rot_3", "opacity",
    "f_dc_0", "f_dc_1", "f_dc_2",
};

enum class PlyScalar { f32, f64, i8, u8, i16, u16, i32, u32 };

std::size_t scalar_size(PlyScalar t) {
    switch (t) {
    case PlyScalar::f32: return 4;
    case PlyScalar::f64: return 8;
    case PlyScalar::i8:
    case PlyScalar::u8: return 1;
    case PlyScalar::i16:
    case PlyScalar::u16: return 2;
    case PlyScalar::i32:
    case PlyScalar::u32: return 4;
    }
    return 0;
}

PlyScalar parse_scalar_type(const std::string& s, const std::string& path) {
    if (s == "float" || s == "float32") return PlyScalar::f32;
    if (s == "double" || s == "float64") return PlyScalar::f64;
    if (s == "char" || s == "int8") return PlyScalar::i8;
    if (s == "uchar" || s == "uint8") return PlyScalar::u8;
    if (s == "short" || s == "int16") return PlyScalar::i16;
    if (s == "ushort" || s == "uint16") return PlyScalar::u16;
    if (s == "int" || s == "int32") return PlyScalar::i32;
    if (s == "uint" || s == "uint32") return PlyScalar::u32;
    throw ParseError("PLY: unsupported property type '" + s + "' in " + path);
}

double decode_scalar(PlyScalar t, const unsigned char* p) {
    switch (t) {
    case PlyScalar::f32: {
        float v;
        std::memcpy(&v, p, 4);
        return v;
    }
    case PlyScalar::f64: {
        double v;
        std::memcpy(&v, p, 8);
        return v;
    }
    case PlyScalar::i8: return *reinterpret_cast<const signed char*>(p);
    case PlyScalar::u8: return *p;
    case PlyScalar::i16: {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        return v;
    }
    case PlyScalar::u16: {
        std::uint16_t v;
        std::memcpy(&v, p, 2);
        return v;
    }
    case PlyScalar::i32: {
        std::int32_t v;
        std::memcpy(&v, p, 4);
        return v;
    }
    case PlyScalar::u32: {
        std::uint32_t v;
        std::memcpy(&v, p, 4);
        return v;
    }
    }
    return 0.0;
}

Mat3 rotation_from_quat(double w, double x, double y, double z) {
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (n > 0) {
        w /= n;
        x /= n;
        y /= n;
        z /= n;
    } else {
        w = 1;
    }
    return Eigen::Quaterniond(w, x, y, z).toRotationMatrix();
}

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

} // namespace

SplatCloud load_splat_ply(const std::string& path, PlyLoadStats* stats) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open PLY file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty PLY file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "ply") throw ParseError("not a PLY file (missing magic): " + path);

    bool binary_le = false, have_format = false;
    std::size_t vertex_count = 0;
    bool in_vertex_element = false, seen_vertex = false;
    std::vector<std::pair<std::string, PlyScalar>> props;

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "comment" || kw == "obj_info" || kw.empty()) continue;
        if (kw == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "binary_little_endian") binary_le = true;
            else if (fmt != "ascii")
                throw ParseError("PLY: unsupported format '" + fmt + "' in " + path);
            have_format = true;
        } else if (kw == "element") {
            std::string name;
            std::size_t count;
            ls >> name >> count;
            if (name == "vertex") {
                if (seen_vertex) throw ParseError("PLY: duplicate vertex element in " + path);
                seen_vertex = true;
                in_vertex_element = true;
                vertex_count = count;
            } else {
                if (!seen_vertex)
                    throw ParseError("PLY: element '" + name + "' precedes vertex element in " + path);
                in_vertex_element = false; // trailing elements are ignored
            }
        } else if (kw == "property") {
            if (!in_vertex_element) continue;
            std::string type;
            ls >> type;
            if (type == "list") throw ParseError("PLY: list property in vertex element in " + path);
            std::string name;
            ls >> name;
            props.emplace_back(name, parse_scalar_type(type, path));
        } else if (kw == "end_header") {
            break;
        } else {
            throw ParseError("PLY: unexpected header line '" + line + "' in " + path);
        }
    }
    if (!have_format) throw ParseError("PLY: missing format line in " + path);
    if (!seen_vertex) throw ParseError("PLY: missing vertex element in " + path);

    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < props.size(); ++i) index.emplace(props[i].first, i);
    for (const char* req : kRequired) {
        if (!index.count(req))
            throw ParseError("PLY: missing required vertex property '" + std::string(req) + "' in " + path);
    }

    std::array<std::size_t, 14> slot{};
    for (std::size_t i = 0; i < std::size(kRequired); ++i) slot[i] = index.at(kRequired[i]);

    std::size_t record_size = 0;
    std::vector<std::size_t> offsets(props.size());
    for (std::size_t i = 0; i < props.size(); ++i) {
        offsets[i] = record_size;
        record_size += scalar_size(props[i].second);
    }

    SplatCloud cloud;
    cloud.kernels.reserve(vertex_count);
    std::vector<double> vals(props.size());
    std::vector<unsigned char> record(record_size);

    for (std::size_t v = 0; v < vertex_count; ++v) {
        if (binary_le) {
            in.read(reinterpret_cast<char*>(record.data()), static_cast<std::streamsize>(record_size));
            if (!in)
                throw ParseError("PLY: truncated vertex data at record " + std::to_string(v) + " in " + path);
            for (std::size_t i = 0; i < props.size(); ++i)
                vals[i] = decode_scalar(props[i].second, record.data() + offsets[i]);
        } else {
            // Token-wise strtod: stream extraction rejects "nan"/"inf",
            // which must reach the finiteness filter below instead.
            std::string tok;
            for (std::size_t i = 0; i < props.size(); ++i) {
                if (!(in >> tok))
                    throw ParseError("PLY: truncated vertex data at record " + std::to_string(v) + " in " + path);
                char* end = nullptr;
                vals[i] = std::strtod(tok.c_str(), &end);
                if (end == tok.c_str())
                    throw ParseError("PLY: unparsable value '" + tok + "' at record " +
                                     std::to_string(v) + " in " + path);
            }
        }

        bool finite = true;
        for (std::size_t i = 0; i < slot.size(); ++i) {
            if (!std::isfinite(vals[slot[i]])) {
                finite = false;
                break;
            }
        }
        if (!finite) {
            if (stats) stats->rejected_records.push_back(v);
            continue;
        }

        GaussianKernel k;
        k.position = Vec3(vals[slot[0]], vals[slot[1]], vals[slot[2]]);
        const Vec3 log_scale(vals[slot[3]], vals[slot[4]], vals[slot[5]]);
        const Mat3 R = rotation_from_quat(vals[slot[6]], vals[slot[7]], vals[slot[8]], vals[slot[9]]);
        const Vec3 s2 = (2.0 * log_scale).array().exp();
        k.covariance = symmetrize(R * s2.asDiagonal() * R.transpose());
        k.opacity = logistic(vals[slot[10]]);
        for (int c = 0; c < 3; ++c)
            k.color[c] = std::clamp(0.5 + kShC0 * vals[slot[11 + c]], 0.0, 1.0);
        cloud.kernels.push_back(k);
    }
    return cloud;
}

void save_frame(const SplatCloud& cloud, const std::string& path, PlySaveStats* stats) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open PLY file for writing: " + path);

    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << cloud.kernels.size() << "\n";
    static const char* kOutProps[] = {
        "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity",
        "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3",
    };
    for (const char* name : kOutProps) out << "property float " << name << "\n";
    out << "end_header\n";

    std::vector<float> rec(14);
    for (const auto& k : cloud.kernels) {
        Eigen::SelfAdjointEigenSolver<Mat3> eig(symmetrize(k.covariance));
        Vec3 lambda = eig.eigenvalues();
        Mat3 Q = eig.eigenvectors();
        for (int i = 0; i < 3; ++i) {
            if (lambda[i] < 0.0 && stats) ++stats->psd_clamps;
            if (lambda[i] < 1e-12) lambda[i] = 1e-12;
        }
        if (Q.determinant() < 0) Q.col(2) = -Q.col(2);
        const Eigen::Quaterniond q(Q);

        const double alpha = std::clamp(k.opacity, 1e-7, 1.0 - 1e-7);
        rec[0] = static_cast<float>(k.position.x());
        rec[1] = static_cast<float>(k.position.y());
        rec[2] = static_cast<float>(k.position.z());
        for (int c = 0; c < 3; ++c)
            rec[3 + c] = static_cast<float>((k.color[c] - 0.5) / kShC0);
        rec[6] = static_cast<float>(std::log(alpha / (1.0 - alpha)));
        for (int i = 0; i < 3; ++i)
            rec[7 + i] = static_cast<float>(0.5 * std::log(lambda[i]));
        rec[10] = static_cast<float>(q.w());
        rec[11] = static_cast<float>(q.x());
        rec[12] = static_cast<float>(q.y());
        rec[13] = static_cast<float>(q.z());
        out.write(reinterpret_cast<const char*>(rec.data()),
                  static_cast<std::streamsize>(rec.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("PLY write failed: " + path);
}

} // namespace splatsim
