#include "macrotensor/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "json.hpp"

namespace macrotensor {

ParseError::ParseError(const std::string& file, std::size_t line, const std::string& what)
    : std::runtime_error(file + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + what),
      line_(line) {}

std::string read_text(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    std::string out;
    char buf[1 << 16];
    int n = 0;
    while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
    int err = 0;
    const char* msg = gzerror(f, &err);
    const std::string emsg = msg ? msg : "";
    gzclose(f);
    if (n < 0 || (err != Z_OK && err != Z_STREAM_END)) throw std::runtime_error("error reading '" + path + "': " + emsg);
    return out;
}

void write_text(const std::string& path, const std::string& text, bool gzip) {
    if (gzip) {
        gzFile f = gzopen(path.c_str(), "wb");
        if (!f) throw std::runtime_error("cannot write '" + path + "'");
        std::size_t done = 0;
        while (done < text.size()) {
            const auto chunk = static_cast<unsigned>(std::min<std::size_t>(text.size() - done, 1u << 20));
            if (gzwrite(f, text.data() + done, chunk) != static_cast<int>(chunk)) {
                gzclose(f);
                throw std::runtime_error("error writing '" + path + "'");
            }
            done += chunk;
        }
        if (gzclose(f) != Z_OK) throw std::runtime_error("error closing '" + path + "'");
        return;
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write '" + path + "'");
    os << text;
    if (!os) throw std::runtime_error("error writing '" + path + "'");
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t p = 0; p <= line.size(); ++p) {
        if (p == line.size() || line[p] == ',') {
            out.push_back(trim(line.substr(start, p - start)));
            start = p + 1;
        }
    }
    return out;
}

bool parse_double(std::string_view s, double& v) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

bool parse_index(std::string_view s, std::size_t& v) {
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    return r.ec == std::errc() && r.ptr == s.data() + s.size() && v >= 1;
}

template <class F>
void for_each_line(const std::string& text, F&& f) {
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        ++line_no;
        f(line_no, std::string_view(text).substr(start, end - start));
        start = end + 1;
    }
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

Tensor3 read_t3(const std::string& path) {
    const std::string text = read_text(path);
    struct Entry {
        std::size_t i, j, k;
        double v;
        bool na;
        std::size_t line;
    };
    std::vector<Entry> entries;
    bool header_seen = false;
    std::size_t mi = 0, mj = 0, mk = 0;
    for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
        const auto line = trim(raw);
        if (line.empty()) return;
        const auto f = split(line);
        if (!header_seen) {
            if (f.size() != 4 || f[0] != "i" || f[1] != "j" || f[2] != "k" || f[3] != "value") {
                throw ParseError(path, line_no, "expected header 'i,j,k,value'");
            }
            header_seen = true;
            return;
        }
        if (f.size() != 4) throw ParseError(path, line_no, "expected 4 fields, found " + std::to_string(f.size()));
        Entry e{};
        e.line = line_no;
        if (!parse_index(f[0], e.i) || !parse_index(f[1], e.j) || !parse_index(f[2], e.k)) {
            throw ParseError(path, line_no, "indices must be positive integers");
        }
        if (f[3] == "NA") {
            e.na = true;
        } else if (!parse_double(f[3], e.v) || !std::isfinite(e.v)) {
            throw ParseError(path, line_no, "value '" + std::string(f[3]) + "' is not a finite number or NA");
        }
        mi = std::max(mi, e.i);
        mj = std::max(mj, e.j);
        mk = std::max(mk, e.k);
        entries.push_back(e);
    });
    if (!header_seen) throw ParseError(path, 0, "empty file");

    Dims d{mi, mj, mk};
    const std::string sidecar = path + ".json";
    if (std::filesystem::exists(sidecar)) {
        try {
            const auto j = nlohmann::json::parse(read_text(sidecar));
            d = Dims{j.at("I").get<std::size_t>(), j.at("J").get<std::size_t>(), j.at("K").get<std::size_t>()};
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(sidecar, 0, std::string("bad sidecar: ") + e.what());
        }
    }
    if (d.I == 0 || d.J == 0 || d.K == 0) throw ParseError(path, 0, "no data rows and no dims");

    std::vector<double> vals(d.size(), Tensor3::kMissing);
    std::vector<std::uint8_t> mask(d.size(), 0);
    std::vector<std::size_t> seen(d.size(), 0);
    for (const auto& e : entries) {
        if (e.i > d.I || e.j > d.J || e.k > d.K) {
            throw ParseError(path, e.line, "index (" + std::to_string(e.i) + "," + std::to_string(e.j) + "," +
                                               std::to_string(e.k) + ") outside dims " + std::to_string(d.I) + "x" +
                                               std::to_string(d.J) + "x" + std::to_string(d.K));
        }
        const std::size_t off = (e.i - 1) * d.slice() + (e.k - 1) * d.J + (e.j - 1);
        if (seen[off]) {
            throw ParseError(path, e.line, "duplicate cell (" + std::to_string(e.i) + "," + std::to_string(e.j) + "," +
                                               std::to_string(e.k) + "), first on line " + std::to_string(seen[off]));
        }
        seen[off] = e.line;
        if (!e.na) {
            vals[off] = e.v;
            mask[off] = 1;
        }
    }
    return Tensor3(d, std::move(vals), std::move(mask));
}

void write_t3(const std::string& path, const Tensor3& t, bool gzip) {
    const Dims d = t.dims();
    std::string out = "i,j,k,value\n";
    out.reserve(d.size() * 28);
    for (std::size_t i = 0; i < d.I; ++i)
        for (std::size_t k = 0; k < d.K; ++k)
            for (std::size_t j = 0; j < d.J; ++j) {
                out += std::to_string(i + 1);
                out += ',';
                out += std::to_string(j + 1);
                out += ',';
                out += std::to_string(k + 1);
                out += ',';
                out += t.observed(i, j, k) ? fmt(t(i, j, k)) : std::string("NA");
                out += '\n';
            }
    write_text(path, out, gzip);
    const nlohmann::json side = {{"I", d.I}, {"J", d.J}, {"K", d.K}};
    write_text(path + ".json", side.dump() + "\n");
}

Unfolded read_matrix_csv(const std::string& path) {
    const std::string text = read_text(path);
    std::vector<std::vector<double>> rows;
    std::vector<std::vector<bool>> obs;
    for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
        const auto line = trim(raw);
        if (line.empty()) return;
        const auto f = split(line);
        if (!rows.empty() && f.size() != rows.front().size()) {
            throw ParseError(path, line_no, "expected " + std::to_string(rows.front().size()) + " fields, found " +
                                                std::to_string(f.size()));
        }
        std::vector<double> r(f.size());
        std::vector<bool> m(f.size(), true);
        for (std::size_t c = 0; c < f.size(); ++c) {
            if (f[c] == "NA" || f[c].empty()) {
                r[c] = Tensor3::kMissing;
                m[c] = false;
            } else if (!parse_double(f[c], r[c]) || !std::isfinite(r[c])) {
                throw ParseError(path, line_no, "field " + std::to_string(c + 1) + " is not a finite number or NA");
            }
        }
        rows.push_back(std::move(r));
        obs.push_back(std::move(m));
    });
    if (rows.empty()) throw ParseError(path, 0, "empty matrix");
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(rows.front().size());
    Unfolded u{Matrix(n, p), Mask(n, p)};
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < p; ++c) {
            u.values(i, c) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
            u.mask(i, c) = obs[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
        }
    return u;
}

void write_matrix_csv(const std::string& path, const Matrix& m, const Mask& mask) {
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c > 0) out += ',';
            out += mask(i, c) ? fmt(m(i, c)) : std::string("NA");
        }
        out += '\n';
    }
    write_text(path, out);
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
    write_matrix_csv(path, m, Mask::Constant(m.rows(), m.cols(), true));
}

}  // namespace macrotensor
