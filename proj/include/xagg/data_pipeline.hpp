#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xagg/common.hpp"
#include "xagg/csv.hpp"

namespace xagg {

enum class ColumnKind { numeric, categorical, ignored };

inline const char* to_string(ColumnKind k) {
    switch (k) {
        case ColumnKind::numeric: return "numeric";
        case ColumnKind::categorical: return "categorical";
        case ColumnKind::ignored: return "ignored";
    }
    return "?";
}

inline ColumnKind column_kind_from_string(const std::string& s) {
    if (s == "numeric") return ColumnKind::numeric;
    if (s == "categorical") return ColumnKind::categorical;
    if (s == "ignored" || s == "ignore") return ColumnKind::ignored;
    throw InputError("unknown column kind '" + s + "'");
}

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    bool target = false;
};

/// Column declarations for a CSV file, in header order.
struct Schema {
    std::vector<ColumnSpec> columns;
    /// Target value mapped to label 1. When unset, the lexicographically larger value is used.
    std::optional<std::string> positive_label;
    /// Cell spellings treated as missing.
    std::vector<std::string> missing_tokens{"", "?", "NA", "NaN", "nan"};
    /// Numeric target binarized as value >= threshold (label 1). Overrides positive_label.
    std::optional<double> positive_threshold;
    char delimiter = ',';
};

struct RawColumn {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    std::vector<double> numeric;       // kind == numeric
    std::vector<std::string> category; // kind == categorical
};

/// Parsed CSV with binary labels. Feature columns exclude the target and ignored columns.
struct RawTable {
    std::vector<RawColumn> columns;
    std::vector<int> labels;
    std::array<std::string, 2> label_names;
    /// Per-column count of numeric cells that failed to parse (their rows are dropped).
    std::map<std::string, std::size_t> parse_failures;
    std::size_t dropped_rows = 0;

    std::size_t rows() const noexcept { return labels.size(); }
};

inline RawTable load_csv(const std::filesystem::path& path, const Schema& schema) {
    if (!std::filesystem::exists(path)) throw InputError("missing file: " + path.string());
    auto records = csv::read_file(path, schema.delimiter);
    if (records.empty()) throw InputError("no data rows in " + path.string());

    const auto& header = records.front();
    if (header.size() != schema.columns.size()) throw InputError("header mismatch: column count differs from schema");
    std::optional<std::size_t> target;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] != schema.columns[i].name)
            throw InputError("header mismatch: expected '" + schema.columns[i].name + "', found '" + header[i] + "'");
        if (schema.columns[i].target) {
            if (target) throw InputError("schema declares more than one target column");
            target = i;
        }
    }
    if (!target) throw InputError("schema declares no target column");
    if (records.size() < 2) throw InputError("no data rows in " + path.string());

    auto is_missing = [&](const std::string& cell) {
        return std::find(schema.missing_tokens.begin(), schema.missing_tokens.end(), cell) !=
               schema.missing_tokens.end();
    };

    RawTable table;
    std::vector<std::size_t> feature_cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto& spec = schema.columns[i];
        if (spec.target || spec.kind == ColumnKind::ignored) continue;
        feature_cols.push_back(i);
        table.columns.push_back(RawColumn{spec.name, spec.kind, {}, {}});
    }

    std::vector<std::string> raw_targets;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() != header.size())
            throw InputError("row " + std::to_string(r) + " has " + std::to_string(rec.size()) + " fields");
        if (is_missing(rec[*target])) {
            ++table.dropped_rows;
            continue;
        }
        bool ok = true;
        std::vector<double> nums(feature_cols.size(), 0.0);
        for (std::size_t c = 0; c < feature_cols.size(); ++c) {
            if (table.columns[c].kind != ColumnKind::numeric) continue;
            const auto& cell = rec[feature_cols[c]];
            auto v = is_missing(cell) ? std::nullopt : csv::parse_double(cell);
            if (!v) {
                ++table.parse_failures[table.columns[c].name];
                ok = false;
            } else {
                nums[c] = *v;
            }
        }
        if (!ok) {
            ++table.dropped_rows;
            continue;
        }
        for (std::size_t c = 0; c < feature_cols.size(); ++c) {
            if (table.columns[c].kind == ColumnKind::numeric)
                table.columns[c].numeric.push_back(nums[c]);
            else
                table.columns[c].category.push_back(rec[feature_cols[c]]);
        }
        raw_targets.push_back(rec[*target]);
    }
    if (raw_targets.empty()) throw InputError("no data rows in " + path.string());

    if (schema.positive_threshold) {
        const double t = *schema.positive_threshold;
        for (const auto& v : raw_targets) {
            const auto d = csv::parse_double(v);
            if (!d) throw InputError("non-numeric target '" + v + "' with positive_threshold set");
            table.labels.push_back(*d >= t ? 1 : 0);
        }
        const std::string ts = csv::format_double(t);
        table.label_names = {"<" + ts, ">=" + ts};
        const auto positives = static_cast<std::size_t>(std::count(table.labels.begin(), table.labels.end(), 1));
        if (positives == 0 || positives == table.labels.size())
            throw InputError("non-binary target: threshold leaves a single class");
        if (table.dropped_rows) warn(std::to_string(table.dropped_rows) + " rows dropped at load (missing values)");
        return table;
    }

    std::set<std::string> distinct(raw_targets.begin(), raw_targets.end());
    if (distinct.size() != 2) throw InputError("non-binary target: " + std::to_string(distinct.size()) + " distinct values");
    std::string positive = *distinct.rbegin();
    if (schema.positive_label) {
        if (!distinct.contains(*schema.positive_label))
            throw InputError("positive label '" + *schema.positive_label + "' not present in target");
        positive = *schema.positive_label;
    }
    for (const auto& v : distinct) {
        if (v == positive)
            table.label_names[1] = v;
        else
            table.label_names[0] = v;
    }
    table.labels.reserve(raw_targets.size());
    for (const auto& v : raw_targets) table.labels.push_back(v == positive ? 1 : 0);
    if (table.dropped_rows) warn(std::to_string(table.dropped_rows) + " rows dropped at load (missing values)");
    return table;
}

struct NumericStat {
    std::string name;
    double mean = 0.0;
    double sd = 1.0;
};

struct CategoricalStat {
    std::string name;
    std::vector<std::string> categories;
};

struct DroppedColumn {
    std::string name;
    std::string reason;   // "constant" or "correlated"
    std::string partner;  // kept column that triggered a correlation drop
    double correlation = 0.0;
};

/// Train-fitted preprocessing statistics. Standard deviations are population (divide-by-n) values.
struct PreprocessStats {
    std::vector<NumericStat> numeric;
    std::vector<CategoricalStat> categorical;
    std::vector<DroppedColumn> dropped;
    double corr_threshold = 0.9;
};

namespace detail {

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0 || sbb <= 0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace detail

/// Fits standardization, category lists and correlated-column removal on the given rows.
/// Correlation filtering runs on numeric columns before encoding; for a pair above the
/// threshold the later column is dropped.
inline PreprocessStats preprocess_fit(const RawTable& table, std::span<const std::size_t> rows,
                                      double corr_threshold = 0.9) {
    if (rows.empty()) throw InputError("preprocess_fit: empty training subset");
    PreprocessStats stats;
    stats.corr_threshold = corr_threshold;

    struct Candidate {
        std::size_t col;
        std::vector<double> values;
        double mean, sd;
    };
    std::vector<Candidate> kept;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        const auto& col = table.columns[c];
        if (col.kind == ColumnKind::categorical) {
            std::set<std::string> cats;
            for (auto r : rows) cats.insert(col.category[r]);
            stats.categorical.push_back({col.name, {cats.begin(), cats.end()}});
            continue;
        }
        std::vector<double> values;
        values.reserve(rows.size());
        for (auto r : rows) values.push_back(col.numeric[r]);
        double mean = 0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        double var = 0;
        for (double v : values) var += (v - mean) * (v - mean);
        const double sd = std::sqrt(var / static_cast<double>(values.size()));
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
            warn("column '" + col.name + "' is constant on the training rows; dropped");
            stats.dropped.push_back({col.name, "constant", "", 0.0});
            continue;
        }
        bool drop = false;
        for (const auto& k : kept) {
            const double r = detail::pearson(k.values, values);
            if (std::abs(r) > corr_threshold) {
                stats.dropped.push_back({col.name, "correlated", table.columns[k.col].name, r});
                drop = true;
                break;
            }
        }
        if (!drop) kept.push_back({c, std::move(values), mean, sd});
    }
    for (const auto& k : kept) stats.numeric.push_back({table.columns[k.col].name, k.mean, k.sd});
    return stats;
}

struct OutputColumn {
    std::string source;
    ColumnKind kind = ColumnKind::numeric;
    std::string category;  // categorical only

    std::string name() const { return kind == ColumnKind::numeric ? source : source + "=" + category; }
};

/// Which output columns are numeric and which form one-hot groups.
struct FeatureLayout {
    struct Group {
        std::string source;
        std::size_t offset = 0;
        std::size_t width = 0;
    };
    std::vector<std::size_t> numeric;
    std::vector<Group> groups;
    std::size_t width = 0;

    static FeatureLayout all_numeric(std::size_t m) {
        FeatureLayout l;
        l.width = m;
        for (std::size_t j = 0; j < m; ++j) l.numeric.push_back(j);
        return l;
    }
};

inline FeatureLayout layout_of(const std::vector<OutputColumn>& columns) {
    FeatureLayout l;
    l.width = columns.size();
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (columns[j].kind == ColumnKind::numeric) {
            l.numeric.push_back(j);
        } else if (!l.groups.empty() && l.groups.back().source == columns[j].source &&
                   l.groups.back().offset + l.groups.back().width == j) {
            ++l.groups.back().width;
        } else {
            l.groups.push_back({columns[j].source, j, 1});
        }
    }
    return l;
}

struct SplitIndices {
    std::vector<std::size_t> train, valid, test;
};

struct SplitSizes {
    std::size_t train = 0, valid = 0, test = 0;
};

/// Preprocessed feature matrix for every loaded row plus the split assignment.
struct Dataset {
    Matrix x;
    std::vector<int> y;
    std::vector<OutputColumn> columns;
    std::array<std::string, 2> label_names;
    SplitIndices splits;
    PreprocessStats stats;

    std::size_t features() const noexcept { return x.cols(); }
    FeatureLayout layout() const { return layout_of(columns); }

    Matrix rows_of(const std::vector<std::size_t>& idx) const { return x.select_rows(idx); }
    std::vector<int> labels_of(const std::vector<std::size_t>& idx) const {
        std::vector<int> out;
        out.reserve(idx.size());
        for (auto i : idx) out.push_back(y[i]);
        return out;
    }
};

/// Encodes the given rows with train-fitted statistics. Unseen categories map to an all-zero group.
inline Matrix preprocess_apply(const RawTable& table, std::span<const std::size_t> rows, const PreprocessStats& stats,
                               std::vector<OutputColumn>* columns_out = nullptr) {
    auto find_col = [&](const std::string& name) -> const RawColumn& {
        for (const auto& c : table.columns)
            if (c.name == name) return c;
        throw InputError("preprocess_apply: column '" + name + "' not in table");
    };
    std::vector<OutputColumn> columns;
    // Output order follows the table's column order.
    struct Piece {
        const RawColumn* col;
        const NumericStat* num;
        const CategoricalStat* cat;
    };
    std::vector<Piece> pieces;
    for (const auto& col : table.columns) {
        if (col.kind == ColumnKind::numeric) {
            auto it = std::find_if(stats.numeric.begin(), stats.numeric.end(),
                                   [&](const NumericStat& s) { return s.name == col.name; });
            if (it == stats.numeric.end()) continue;
            pieces.push_back({&find_col(col.name), &*it, nullptr});
            columns.push_back({col.name, ColumnKind::numeric, ""});
        } else if (col.kind == ColumnKind::categorical) {
            auto it = std::find_if(stats.categorical.begin(), stats.categorical.end(),
                                   [&](const CategoricalStat& s) { return s.name == col.name; });
            if (it == stats.categorical.end()) continue;
            pieces.push_back({&find_col(col.name), nullptr, &*it});
            for (const auto& cat : it->categories) columns.push_back({col.name, ColumnKind::categorical, cat});
        }
    }

    Matrix out(rows.size(), columns.size());
    std::size_t unseen = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = rows[i];
        std::size_t j = 0;
        for (const auto& p : pieces) {
            if (p.num) {
                out(i, j++) = (p.col->numeric[r] - p.num->mean) / p.num->sd;
            } else {
                const auto& cats = p.cat->categories;
                auto it = std::lower_bound(cats.begin(), cats.end(), p.col->category[r]);
                if (it != cats.end() && *it == p.col->category[r])
                    out(i, j + static_cast<std::size_t>(it - cats.begin())) = 1.0;
                else
                    ++unseen;
                j += cats.size();
            }
        }
    }
    if (unseen) warn(std::to_string(unseen) + " categorical cells with unseen categories encoded as all-zero");
    if (columns_out) *columns_out = std::move(columns);
    return out;
}

/// Stratified split with exact sizes. Per-class quotas follow the overall class ratio
/// (largest-remainder rounding); rows not drawn belong to no split.
inline SplitIndices split(const std::vector<int>& labels, SplitSizes sizes, std::uint64_t seed) {
    const std::size_t n = labels.size();
    if (sizes.train + sizes.valid + sizes.test > n)
        throw InputError("split sizes (" + std::to_string(sizes.train) + ", " + std::to_string(sizes.valid) + ", " +
                         std::to_string(sizes.test) + ") exceed " + std::to_string(n) + " rows");
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[labels[i] ? 1 : 0].push_back(i);
    Rng rng = make_rng(seed, 0x5711);
    for (auto& v : by_class) shuffle(v, rng);

    const std::array<std::size_t, 3> want{sizes.test, sizes.valid, sizes.train};
    std::array<std::array<std::size_t, 2>, 3> quota{};
    std::array<std::size_t, 2> left{by_class[0].size(), by_class[1].size()};
    for (std::size_t s = 0; s < 3; ++s) {
        const double p1 = static_cast<double>(by_class[1].size()) / static_cast<double>(n);
        const double ideal1 = p1 * static_cast<double>(want[s]);
        std::size_t q1 = static_cast<std::size_t>(std::floor(ideal1));
        if (ideal1 - std::floor(ideal1) >= 0.5) ++q1;
        q1 = std::min(q1, left[1]);
        std::size_t q0 = want[s] - q1;
        if (q0 > left[0]) {
            q1 += q0 - left[0];
            q0 = left[0];
        }
        quota[s] = {q0, q1};
        left[0] -= q0;
        left[1] -= q1;
    }
    SplitIndices out;
    std::array<std::vector<std::size_t>*, 3> dest{&out.test, &out.valid, &out.train};
    std::array<std::size_t, 2> cursor{0, 0};
    for (std::size_t s = 0; s < 3; ++s) {
        for (int c = 0; c < 2; ++c) {
            for (std::size_t k = 0; k < quota[s][c]; ++k) dest[s]->push_back(by_class[c][cursor[c]++]);
        }
        std::sort(dest[s]->begin(), dest[s]->end());
    }
    return out;
}

/// Split, fit on the training rows, and encode every loaded row.
inline Dataset prepare_dataset(const RawTable& table, SplitSizes sizes, std::uint64_t seed,
                               double corr_threshold = 0.9) {
    Dataset ds;
    ds.splits = split(table.labels, sizes, seed);
    ds.stats = preprocess_fit(table, ds.splits.train, corr_threshold);
    std::vector<std::size_t> all(table.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    ds.x = preprocess_apply(table, all, ds.stats, &ds.columns);
    ds.y = table.labels;
    ds.label_names = table.label_names;
    return ds;
}

// ---------------------------------------------------------------------------
// Persistence: dataset.csv holds the encoded matrix; dataset.json the sidecar.

inline nlohmann::json to_json(const PreprocessStats& s) {
    nlohmann::json j;
    j["corr_threshold"] = s.corr_threshold;
    j["numeric"] = nlohmann::json::array();
    for (const auto& n : s.numeric) j["numeric"].push_back({{"name", n.name}, {"mean", n.mean}, {"sd", n.sd}});
    j["categorical"] = nlohmann::json::array();
    for (const auto& c : s.categorical) j["categorical"].push_back({{"name", c.name}, {"categories", c.categories}});
    j["dropped"] = nlohmann::json::array();
    for (const auto& d : s.dropped)
        j["dropped"].push_back(
            {{"name", d.name}, {"reason", d.reason}, {"partner", d.partner}, {"correlation", d.correlation}});
    return j;
}

inline PreprocessStats stats_from_json(const nlohmann::json& j) {
    PreprocessStats s;
    s.corr_threshold = j.at("corr_threshold").get<double>();
    for (const auto& n : j.at("numeric")) s.numeric.push_back({n.at("name"), n.at("mean"), n.at("sd")});
    for (const auto& c : j.at("categorical"))
        s.categorical.push_back({c.at("name"), c.at("categories").get<std::vector<std::string>>()});
    for (const auto& d : j.at("dropped"))
        s.dropped.push_back({d.at("name"), d.at("reason"), d.at("partner"), d.at("correlation")});
    return s;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    csv::Writer w;
    csv::Record header;
    for (const auto& c : ds.columns) header.push_back(c.name());
    header.push_back("label");
    w.row(header);
    for (std::size_t i = 0; i < ds.x.rows(); ++i) {
        csv::Record rec;
        for (double v : ds.x.row(i)) rec.push_back(csv::format_double(v));
        rec.push_back(std::to_string(ds.y[i]));
        w.row(rec);
    }
    w.save(dir / "dataset.csv");

    nlohmann::json j;
    j["label_names"] = ds.label_names;
    j["columns"] = nlohmann::json::array();
    for (const auto& c : ds.columns)
        j["columns"].push_back({{"source", c.source}, {"kind", to_string(c.kind)}, {"category", c.category}});
    j["splits"] = {{"train", ds.splits.train}, {"valid", ds.splits.valid}, {"test", ds.splits.test}};
    j["stats"] = to_json(ds.stats);
    std::ofstream(dir / "dataset.json", std::ios::binary) << j.dump(2) << '\n';
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
    const auto json_path = dir / "dataset.json";
    const auto csv_path = dir / "dataset.csv";
    if (!std::filesystem::exists(json_path) || !std::filesystem::exists(csv_path))
        throw InputError("prepared dataset not found in " + dir.string());
    nlohmann::json j;
    std::ifstream(json_path) >> j;
    Dataset ds;
    ds.label_names = j.at("label_names").get<std::array<std::string, 2>>();
    for (const auto& c : j.at("columns"))
        ds.columns.push_back({c.at("source"), column_kind_from_string(c.at("kind")), c.at("category")});
    ds.splits.train = j.at("splits").at("train").get<std::vector<std::size_t>>();
    ds.splits.valid = j.at("splits").at("valid").get<std::vector<std::size_t>>();
    ds.splits.test = j.at("splits").at("test").get<std::vector<std::size_t>>();
    ds.stats = stats_from_json(j.at("stats"));

    auto table = csv::Table::load(csv_path);
    const std::size_t m = ds.columns.size();
    if (table.header().size() != m + 1) throw InputError("dataset.csv width does not match sidecar");
    ds.x = Matrix(table.rows().size(), m);
    for (std::size_t i = 0; i < table.rows().size(); ++i) {
        const auto& rec = table.rows()[i];
        for (std::size_t c = 0; c < m; ++c) ds.x(i, c) = csv::require_double(rec[c], "dataset.csv");
        ds.y.push_back(rec[m] == "1" ? 1 : 0);
    }
    return ds;
}

}  // namespace xagg
