#pragma once

// Dataset file formats: delimited text (RFC-4180 quoting), IDX binaries as
// published for MNIST, and a JSON sidecar describing a CSV payload.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <variant>
#include <vector>

#include "json.hpp"

#include "convexlda/dataset.hpp"
#include "convexlda/error.hpp"

namespace convexlda {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
    return buf.str();
}

/// Writes `content` next to `path` and renames it into place.
inline void atomic_write(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw IoError("error while writing '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot move output into place at '" + path.string() + "'");
    }
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------- CSV ----

/// Splits delimited text into records. Quoted fields may contain the
/// delimiter, newlines and doubled quotes.
inline std::vector<std::vector<std::string>> parse_delimited(const std::string& text, char delimiter) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        const bool blank = record.size() == 1 && record[0].empty();
        if (!blank) records.push_back(std::move(record));
        record.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (in_quotes) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (ch == '\n') ++line;
                field.push_back(ch);
            }
            continue;
        }
        if (ch == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (ch == delimiter) {
            end_field();
        } else if (ch == '\r') {
            // CRLF line endings
        } else if (ch == '\n') {
            end_record();
            ++line;
        } else {
            field.push_back(ch);
            if (ch != ' ' && ch != '\t') field_started = true;
        }
    }
    if (in_quotes) throw ParseError("unterminated quoted field", records.size() + 1, record.size() + 1);
    if (!field.empty() || !record.empty()) end_record();
    return records;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

/// Parses a finite real; nullopt for anything else (including nan/inf).
inline std::optional<double> parse_real(const std::string& cell) {
    const std::string t = trim(cell);
    if (t.empty()) return std::nullopt;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    if (*first == '+') ++first;
    double v = 0.0;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

struct CsvOptions {
    char delimiter = ',';
    /// Column name (requires a header) or zero-based index; negative counts
    /// from the end, so the default is the last column.
    std::variant<std::string, long> label_column = -1L;
    enum class Header { automatic, present, absent } header = Header::automatic;
};

/// Loads samples from rows of a delimited file. Samples become columns of
/// X in file order; string labels map to 0..M-1 by first appearance.
inline Dataset load_csv(const fs::path& path, const CsvOptions& opts = {}) {
    const auto records = parse_delimited(read_file(path), opts.delimiter);
    if (records.empty()) throw ValidationError("csv '" + path.string() + "': file has no rows");
    const std::size_t width = records.front().size();
    if (width < 2) throw ValidationError("csv '" + path.string() + "': need at least one feature and a label column");

    bool has_header = opts.header == CsvOptions::Header::present;
    std::size_t label_col = 0;
    if (const auto* name = std::get_if<std::string>(&opts.label_column)) {
        if (opts.header == CsvOptions::Header::absent) {
            throw ValidationError("csv: label column given by name but the file has no header");
        }
        has_header = true;
        bool found = false;
        for (std::size_t c = 0; c < width; ++c) {
            if (trim(records.front()[c]) == *name) {
                label_col = c;
                found = true;
                break;
            }
        }
        if (!found) throw ValidationError("csv '" + path.string() + "': no column named '" + *name + "'");
    } else {
        const long idx = std::get<long>(opts.label_column);
        const long resolved = idx < 0 ? static_cast<long>(width) + idx : idx;
        if (resolved < 0 || resolved >= static_cast<long>(width)) {
            throw ValidationError("csv '" + path.string() + "': label column index " + std::to_string(idx) +
                                  " out of range");
        }
        label_col = static_cast<std::size_t>(resolved);
        if (opts.header == CsvOptions::Header::automatic) {
            for (std::size_t c = 0; c < width; ++c) {
                if (c != label_col && !parse_real(records.front()[c])) {
                    has_header = true;
                    break;
                }
            }
        }
    }

    const std::size_t first_row = has_header ? 1 : 0;
    const std::size_t n = records.size() - first_row;
    if (n == 0) throw ValidationError("csv '" + path.string() + "': no data rows");
    const auto d = static_cast<Index>(width - 1);

    Dataset ds;
    ds.X.resize(d, static_cast<Index>(n));
    ds.labels.resize(n);
    if (has_header) {
        for (std::size_t c = 0; c < width; ++c) {
            if (c != label_col) ds.feature_names.push_back(trim(records.front()[c]));
        }
    }
    std::map<std::string, int> label_ids;
    for (std::size_t r = first_row; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() != width) {
            throw ParseError("csv '" + path.string() + "': expected " + std::to_string(width) + " fields, found " +
                                 std::to_string(rec.size()),
                             r + 1, rec.size());
        }
        const auto s = static_cast<Index>(r - first_row);
        Index f = 0;
        for (std::size_t c = 0; c < width; ++c) {
            if (c == label_col) continue;
            const auto v = parse_real(rec[c]);
            if (!v) throw ParseError("csv '" + path.string() + "': cannot parse '" + rec[c] + "' as a finite real", r + 1, c + 1);
            ds.X(f++, s) = *v;
        }
        const std::string label = trim(rec[label_col]);
        if (label.empty()) throw ParseError("csv '" + path.string() + "': empty label", r + 1, label_col + 1);
        auto [it, inserted] = label_ids.try_emplace(label, static_cast<int>(label_ids.size()));
        if (inserted) ds.class_names.push_back(label);
        ds.labels[static_cast<std::size_t>(s)] = it->second;
    }
    if (ds.class_names.size() < 2) {
        throw ValidationError("csv '" + path.string() + "': only one class present");
    }
    ds.validate();
    return ds;
}

/// Writes one row per sample: features then a `label` column holding class
/// names (or integer labels). Values use shortest round-trip formatting.
inline std::string to_csv(const Dataset& ds, char delimiter = ',') {
    std::string out;
    for (Index i = 0; i < ds.dim(); ++i) {
        out += ds.feature_names.empty() ? "f" + std::to_string(i) : ds.feature_names[static_cast<std::size_t>(i)];
        out += delimiter;
    }
    out += "label\n";
    for (Index s = 0; s < ds.size(); ++s) {
        for (Index i = 0; i < ds.dim(); ++i) {
            out += format_double(ds.X(i, s));
            out += delimiter;
        }
        out += ds.class_name(ds.labels[static_cast<std::size_t>(s)]);
        out += '\n';
    }
    return out;
}

inline void write_csv(const Dataset& ds, const fs::path& path, char delimiter = ',') {
    atomic_write(path, to_csv(ds, delimiter));
}

// ------------------------------------------------------------ sidecar ----

inline fs::path sidecar_path(const fs::path& csv_path) {
    fs::path p = csv_path;
    p.replace_extension(".json");
    return p;
}

inline nlohmann::json sidecar_json(const Dataset& ds) {
    std::vector<std::string> names;
    for (int c = 0; c < ds.num_classes(); ++c) names.push_back(ds.class_name(c));
    nlohmann::json j;
    j["format"] = "convexlda-dataset";
    j["d"] = ds.dim();
    j["n"] = ds.size();
    j["M"] = ds.num_classes();
    j["class_names"] = names;
    j["feature_names"] = ds.feature_names;
    j["label_column"] = "label";
    return j;
}

/// CSV payload plus its JSON sidecar.
inline void write_dataset(const Dataset& ds, const fs::path& csv_path) {
    write_csv(ds, csv_path);
    atomic_write(sidecar_path(csv_path), sidecar_json(ds).dump(2) + "\n");
}

/// Reads a CSV; when a sidecar is present its class order takes precedence
/// over first appearance and its d/n/M are checked against the payload.
inline Dataset read_dataset(const fs::path& csv_path, CsvOptions opts = {}) {
    const fs::path side = sidecar_path(csv_path);
    if (!fs::exists(side)) return load_csv(csv_path, opts);

    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_file(side));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("sidecar '" + side.string() + "': " + e.what());
    }
    if (meta.value("format", std::string{}) != "convexlda-dataset") return load_csv(csv_path, opts);
    opts.label_column = meta.value("label_column", std::string("label"));
    Dataset ds = load_csv(csv_path, opts);
    const auto names = meta.value("class_names", std::vector<std::string>{});
    if (meta.value("d", Index{-1}) != ds.dim() || meta.value("n", Index{-1}) != ds.size() ||
        meta.value("M", -1) != ds.num_classes()) {
        throw ValidationError("sidecar '" + side.string() + "' does not match its CSV payload");
    }
    if (names.size() == ds.class_names.size()) {
        std::map<std::string, int> order;
        for (std::size_t c = 0; c < names.size(); ++c) order[names[c]] = static_cast<int>(c);
        std::vector<int> remap(ds.class_names.size());
        for (std::size_t c = 0; c < ds.class_names.size(); ++c) {
            auto it = order.find(ds.class_names[c]);
            if (it == order.end()) throw ValidationError("sidecar class names do not match CSV labels");
            remap[c] = it->second;
        }
        for (int& l : ds.labels) l = remap[static_cast<std::size_t>(l)];
        ds.class_names = names;
    }
    return ds;
}

// ---------------------------------------------------------------- IDX ----

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

namespace detail {

inline std::uint32_t read_be32(const std::string& bytes, std::size_t offset, const std::string& what) {
    if (offset + 4 > bytes.size()) throw FormatError(what + ": truncated header");
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 3]));
}

inline void put_be32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>(v & 0xFF));
}

}  // namespace detail

struct IdxOptions {
    bool raw = false;  // keep 0..255 pixel values instead of dividing by 255
};

/// Loads an IDX image/label pair. Pixels are flattened row-major; labels
/// map to 0..M-1 in ascending byte order with names "0", "1", ...
inline Dataset load_idx(const fs::path& images_path, const fs::path& labels_path, const IdxOptions& opts = {}) {
    const std::string img = read_file(images_path);
    const std::string lab = read_file(labels_path);
    const std::string img_what = "idx images '" + images_path.string() + "'";
    const std::string lab_what = "idx labels '" + labels_path.string() + "'";

    const auto img_magic = detail::read_be32(img, 0, img_what);
    if (img_magic != kIdxImageMagic) throw FormatError(img_what + ": wrong magic number " + std::to_string(img_magic));
    const auto lab_magic = detail::read_be32(lab, 0, lab_what);
    if (lab_magic != kIdxLabelMagic) throw FormatError(lab_what + ": wrong magic number " + std::to_string(lab_magic));

    const std::uint64_t count = detail::read_be32(img, 4, img_what);
    const std::uint64_t rows = detail::read_be32(img, 8, img_what);
    const std::uint64_t cols = detail::read_be32(img, 12, img_what);
    const std::uint64_t label_count = detail::read_be32(lab, 4, lab_what);
    if (rows == 0 || cols == 0) throw FormatError(img_what + ": zero image size");
    const std::uint64_t pixels = rows * cols;
    if (img.size() < 16 + count * pixels) throw FormatError(img_what + ": truncated pixel data");
    if (lab.size() < 8 + label_count) throw FormatError(lab_what + ": truncated label data");
    if (count != label_count) {
        throw ValidationError("idx: " + std::to_string(count) + " images but " + std::to_string(label_count) + " labels");
    }

    std::vector<int> present(256, 0);
    for (std::uint64_t s = 0; s < count; ++s) present[static_cast<unsigned char>(lab[8 + s])] = 1;
    std::vector<int> dense(256, -1);
    Dataset ds;
    for (int v = 0; v < 256; ++v) {
        if (present[static_cast<std::size_t>(v)]) {
            dense[static_cast<std::size_t>(v)] = static_cast<int>(ds.class_names.size());
            ds.class_names.push_back(std::to_string(v));
        }
    }
    const double scale = opts.raw ? 1.0 : 1.0 / 255.0;
    ds.X.resize(static_cast<Index>(pixels), static_cast<Index>(count));
    ds.labels.resize(count);
    for (std::uint64_t s = 0; s < count; ++s) {
        const std::size_t base = 16 + s * pixels;
        for (std::uint64_t p = 0; p < pixels; ++p) {
            ds.X(static_cast<Index>(p), static_cast<Index>(s)) =
                static_cast<double>(static_cast<unsigned char>(img[base + p])) * scale;
        }
        ds.labels[s] = dense[static_cast<unsigned char>(lab[8 + s])];
    }
    ds.validate();
    return ds;
}

/// Writes an IDX pair. Entries are taken as [0,1] intensities unless `raw`,
/// then rounded and clamped to bytes; labels are written as integers.
inline void write_idx(const Dataset& ds, const fs::path& images_path, const fs::path& labels_path,
                      std::uint32_t rows, std::uint32_t cols, bool raw = false) {
    if (static_cast<Index>(rows) * static_cast<Index>(cols) != ds.dim()) {
        throw ShapeError("write_idx: rows*cols must equal the feature count");
    }
    std::string img;
    detail::put_be32(img, kIdxImageMagic);
    detail::put_be32(img, static_cast<std::uint32_t>(ds.size()));
    detail::put_be32(img, rows);
    detail::put_be32(img, cols);
    const double scale = raw ? 1.0 : 255.0;
    for (Index s = 0; s < ds.size(); ++s) {
        for (Index p = 0; p < ds.dim(); ++p) {
            const double v = std::clamp(std::round(ds.X(p, s) * scale), 0.0, 255.0);
            img.push_back(static_cast<char>(static_cast<unsigned char>(v)));
        }
    }
    std::string lab;
    detail::put_be32(lab, kIdxLabelMagic);
    detail::put_be32(lab, static_cast<std::uint32_t>(ds.size()));
    for (int l : ds.labels) {
        if (l < 0 || l > 255) throw ValidationError("write_idx: labels must fit in a byte");
        lab.push_back(static_cast<char>(static_cast<unsigned char>(l)));
    }
    atomic_write(images_path, img);
    atomic_write(labels_path, lab);
}

}  // namespace convexlda
