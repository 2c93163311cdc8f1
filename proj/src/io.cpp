#include "deepraft/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

namespace deepraft {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(const std::string& text, char sep = ',') {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// RFC-4180-ish: quoted fields may contain commas and doubled quotes.
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c == '"') {
                if (k + 1 < line.size() && line[k + 1] == '"') {
                    cur += '"';
                    ++k;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(trim(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(trim(cur));
    return fields;
}

bool is_missing(const std::string& v) {
    return v.empty() || v == "NA" || v == "na" || v == "NaN" || v == "nan" || v == "." || v == "?";
}

std::optional<double> parse_double(const std::string& v) {
    const char* begin = v.data();
    const char* end = v.data() + v.size();
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return out;
}

std::optional<std::uint8_t> parse_event(const std::string& v) {
    std::string s = v;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "1" || s == "true" || s == "yes" || s == "1.0") return 1;
    if (s == "0" || s == "false" || s == "no" || s == "0.0") return 0;
    return std::nullopt;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_hex(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_hex(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw SchemaError("bad floating-point field: " + s);
    return v;
}

std::map<std::string, std::string> read_key_values(std::istream& in, const std::string& origin) {
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw SchemaError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        }
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

std::ifstream open_input(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, mode);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

void ColumnSpec::validate() const {
    if (time_column.empty() || event_column.empty()) throw SchemaError("ColumnSpec: time and event columns required");
    if (time_column == event_column) throw SchemaError("ColumnSpec: time and event columns must differ");
    std::set<std::string> seen;
    for (const auto& c : covariate_columns) {
        if (c == time_column || c == event_column) {
            throw SchemaError("ColumnSpec: covariate " + c + " overlaps the time/event columns");
        }
        if (!seen.insert(c).second) throw SchemaError("ColumnSpec: duplicate covariate " + c);
    }
    for (const auto& [col, levels] : categorical) {
        if (!seen.count(col)) throw SchemaError("ColumnSpec: categorical column " + col + " is not a covariate");
        if (levels.size() < 2) throw SchemaError("ColumnSpec: categorical column " + col + " needs >= 2 levels");
        if (std::set<std::string>(levels.begin(), levels.end()).size() != levels.size()) {
            throw SchemaError("ColumnSpec: duplicate level in " + col);
        }
    }
}

ColumnSpec load_column_spec(const std::filesystem::path& path) {
    auto in = open_input(path);
    const auto kv = read_key_values(in, path.string());
    ColumnSpec spec;
    for (const auto& [key, value] : kv) {
        if (key == "time") {
            spec.time_column = value;
        } else if (key == "event") {
            spec.event_column = value;
        } else if (key == "covariates") {
            spec.covariate_columns = split_list(value);
        } else if (key.rfind("categorical.", 0) == 0) {
            spec.categorical[key.substr(std::strlen("categorical."))] = split_list(value);
        } else {
            throw SchemaError(path.string() + ": unknown key " + key);
        }
    }
    spec.validate();
    return spec;
}

Matrix Standardizer::apply(const Matrix& x) const {
    Matrix out = x;
    for (std::size_t k = 0; k < columns.size(); ++k) {
        const auto c = static_cast<Eigen::Index>(columns[k]);
        if (c >= out.cols()) throw DimensionError("Standardizer: column out of range");
        out.col(c) = (out.col(c).array() - mean[k]) / sd[k];
    }
    return out;
}

SurvivalDataset Standardizer::apply(const SurvivalDataset& data) const {
    return data.with_covariates(apply(data.covariates()));
}

Standardizer fit_standardizer(const Matrix& x, const std::vector<std::size_t>& columns) {
    Standardizer s;
    if (x.rows() == 0) throw EmptyDataError("fit_standardizer: no rows");
    for (const auto c : columns) {
        if (static_cast<Eigen::Index>(c) >= x.cols()) throw DimensionError("fit_standardizer: column out of range");
        const auto col = x.col(static_cast<Eigen::Index>(c));
        const double m = col.mean();
        const double var = (col.array() - m).square().mean();
        s.columns.push_back(c);
        s.mean.push_back(m);
        s.sd.push_back(var > 0.0 ? std::sqrt(var) : 1.0);
    }
    return s;
}

LoadedDataset load_csv(const std::filesystem::path& path, const ColumnSpec& spec, const LoadOptions& options) {
    spec.validate();
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw SchemaError(path.string() + ": missing header row");
    const auto header = split_csv_line(line);
    const auto find_column = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError(path.string() + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t time_idx = find_column(spec.time_column);
    const std::size_t event_idx = find_column(spec.event_column);
    const std::optional<std::size_t> target_idx =
        options.target_column.empty() ? std::nullopt : std::optional<std::size_t>(find_column(options.target_column));

    struct CovariateSource {
        std::size_t index;
        const std::vector<std::string>* levels;  // null for continuous
    };
    std::vector<CovariateSource> sources;
    std::vector<std::string> names;
    std::vector<std::size_t> continuous;
    for (const auto& col : spec.covariate_columns) {
        const auto it = spec.categorical.find(col);
        const std::vector<std::string>* levels = it == spec.categorical.end() ? nullptr : &it->second;
        sources.push_back({find_column(col), levels});
        if (levels) {
            for (std::size_t l = 1; l < levels->size(); ++l) names.push_back(col + "=" + (*levels)[l]);
        } else {
            continuous.push_back(names.size());
            names.push_back(col);
        }
    }

    LoadedDataset out{SurvivalDataset(Vector(0), {}, Matrix(0, static_cast<Eigen::Index>(names.size()))),
                      names, continuous, {}, std::nullopt, 0, 0, 0};
    std::vector<double> times;
    EventVector events;
    std::vector<double> values;
    std::vector<double> targets;
    std::size_t lineno = 1;
    std::vector<double> row(names.size());
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        ++out.raw_rows;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
        }
        bool missing = is_missing(fields[time_idx]) || is_missing(fields[event_idx]);
        for (const auto& src : sources) missing = missing || is_missing(fields[src.index]);
        if (target_idx) missing = missing || is_missing(fields[*target_idx]);
        if (missing) {
            ++out.dropped_missing;
            continue;
        }
        const auto where = [&] { return path.string() + ":" + std::to_string(lineno) + ": "; };
        const auto t = parse_double(fields[time_idx]);
        if (!t) throw SchemaError(where() + "time value '" + fields[time_idx] + "' is not numeric");
        const auto d = parse_event(fields[event_idx]);
        if (!d) throw SchemaError(where() + "event value '" + fields[event_idx] + "' is not 0/1");
        if (!(*t > 0.0)) {
            ++out.dropped_nonpositive_time;
            continue;
        }
        std::size_t k = 0;
        for (const auto& src : sources) {
            const std::string& v = fields[src.index];
            if (src.levels) {
                const auto pos = std::find(src.levels->begin(), src.levels->end(), v);
                if (pos == src.levels->end()) {
                    throw SchemaError(where() + "level '" + v + "' of column '" + header[src.index] + "' is not declared");
                }
                const auto level = static_cast<std::size_t>(pos - src.levels->begin());
                for (std::size_t l = 1; l < src.levels->size(); ++l) row[k++] = l == level ? 1.0 : 0.0;
            } else {
                const auto x = parse_double(v);
                if (!x) throw SchemaError(where() + "value '" + v + "' of column '" + header[src.index] + "' is not numeric");
                row[k++] = *x;
            }
        }
        if (target_idx) {
            const auto y = parse_double(fields[*target_idx]);
            if (!y) throw SchemaError(where() + "target value '" + fields[*target_idx] + "' is not numeric");
            targets.push_back(*y);
        }
        times.push_back(*t);
        events.push_back(*d);
        values.insert(values.end(), row.begin(), row.end());
    }
    if (times.empty()) throw EmptyDataError(path.string() + ": no usable rows after filtering");

    const auto n = static_cast<Eigen::Index>(times.size());
    const auto p = static_cast<Eigen::Index>(names.size());
    Matrix x = p > 0 ? Matrix(Eigen::Map<const Matrix>(values.data(), n, p)) : Matrix(n, 0);
    if (options.standardize) {
        out.standardizer = fit_standardizer(x, continuous);
        x = out.standardizer.apply(x);
    }
    out.data = SurvivalDataset(Eigen::Map<const Vector>(times.data(), n), std::move(events), std::move(x));
    if (target_idx) out.target = Vector(Eigen::Map<const Vector>(targets.data(), n));
    return out;
}

void write_dataset_csv(const std::filesystem::path& path, const SurvivalDataset& data,
                       const std::vector<std::string>& covariate_names, const std::optional<Vector>& true_mean) {
    if (!covariate_names.empty() && covariate_names.size() != data.p()) {
        throw DimensionError("write_dataset_csv: name count does not match covariates");
    }
    if (true_mean && static_cast<std::size_t>(true_mean->size()) != data.n()) {
        throw DimensionError("write_dataset_csv: true mean length");
    }
    auto out = open_output(path);
    out << "time,event";
    for (std::size_t c = 0; c < data.p(); ++c) {
        out << ',' << (covariate_names.empty() ? "x" + std::to_string(c + 1) : covariate_names[c]);
    }
    if (true_mean) out << ",true_mean";
    out << '\n';
    const Matrix& x = data.covariates();
    for (std::size_t i = 0; i < data.n(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out << format_double(data.observed_time()[r]) << ',' << int(data.event()[i]);
        for (Eigen::Index c = 0; c < x.cols(); ++c) out << ',' << format_double(x(r, c));
        if (true_mean) out << ',' << format_double((*true_mean)[r]);
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

ColumnSpec default_column_spec(std::size_t p) {
    ColumnSpec spec;
    spec.time_column = "time";
    spec.event_column = "event";
    for (std::size_t c = 0; c < p; ++c) spec.covariate_columns.push_back("x" + std::to_string(c + 1));
    return spec;
}

ColumnSpec infer_column_spec(const std::filesystem::path& path, const std::string& time_column,
                             const std::string& event_column, const std::vector<std::string>& exclude) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw SchemaError(path.string() + ": missing header row");
    ColumnSpec spec;
    spec.time_column = time_column;
    spec.event_column = event_column;
    for (const auto& col : split_csv_line(line)) {
        if (col == time_column || col == event_column) continue;
        if (std::find(exclude.begin(), exclude.end(), col) != exclude.end()) continue;
        spec.covariate_columns.push_back(col);
    }
    spec.validate();
    return spec;
}

TrainTestSplit split_train_test(const SurvivalDataset& data, double fraction, std::uint64_t seed,
                                const std::vector<std::size_t>& standardize_columns) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("split_train_test: fraction must be in (0, 1)");
    const std::size_t n = data.n();
    const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train >= n) {
        throw std::invalid_argument("split_train_test: split of " + std::to_string(n) + " rows leaves an empty part");
    }
    constexpr std::size_t max_attempts = 10;
    for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng = make_stream(seed, attempt - 1);
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<std::size_t> train_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
        std::vector<std::size_t> test_rows(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
        std::sort(train_rows.begin(), train_rows.end());
        std::sort(test_rows.begin(), test_rows.end());
        SurvivalDataset train = data.subset(train_rows);
        if (train.event_count() == 0) {
            std::cerr << "warning: split_train_test attempt " << attempt << " has no training events; redrawing\n";
            continue;
        }
        SurvivalDataset test = data.subset(test_rows);
        Standardizer st;
        if (!standardize_columns.empty()) {
            st = fit_standardizer(train.covariates(), standardize_columns);
            train = st.apply(train);
            test = st.apply(test);
        }
        return {std::move(train), std::move(test), std::move(train_rows), std::move(test_rows), std::move(st), attempt};
    }
    throw EmptyEventError("split_train_test: no training events after " + std::to_string(max_attempts) + " attempts");
}

// ---------------------------------------------------------------------------
// Config files
// ---------------------------------------------------------------------------

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw SchemaError("config: " + key + " expects a boolean, got '" + v + "'");
}

double parse_number(const std::string& key, const std::string& v) {
    const auto d = parse_double(v);
    if (!d) throw SchemaError("config: " + key + " expects a number, got '" + v + "'");
    return *d;
}

std::uint64_t parse_count(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw SchemaError("config: " + key + " expects a nonnegative integer, got '" + v + "'");
    }
    return out;
}

template <class T, class F>
std::vector<T> parse_each(const std::string& value, F&& f) {
    std::vector<T> out;
    for (const auto& item : split_list(value)) out.push_back(f(item));
    if (out.empty()) throw SchemaError("config: empty list");
    return out;
}

template <class T, class F>
std::string join(const std::vector<T>& items, F&& f) {
    std::string out;
    for (std::size_t k = 0; k < items.size(); ++k) {
        if (k) out += ',';
        out += f(items[k]);
    }
    return out;
}

}  // namespace

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
    auto& t = c.train;
    if (key == "mean_kinds") {
        c.mean_kinds = parse_each<MeanKind>(value, parse_mean_kind);
    } else if (key == "error_dists") {
        c.error_dists = parse_each<ErrorDist>(value, parse_error_dist);
    } else if (key == "taus") {
        c.taus = parse_each<double>(value, [&](const std::string& s) { return parse_number(key, s); });
    } else if (key == "n_trains") {
        c.n_trains = parse_each<std::size_t>(value, [&](const std::string& s) { return parse_count(key, s); });
    } else if (key == "n_test") {
        c.n_test = parse_count(key, value);
    } else if (key == "noise_dims") {
        c.noise_dims = parse_count(key, value);
    } else if (key == "replicates") {
        c.replicates = parse_count(key, value);
    } else if (key == "seed") {
        c.seed = parse_count(key, value);
    } else if (key == "methods") {
        c.methods = parse_each<Method>(value, parse_method);
    } else if (key == "architecture") {
        if (value != "auto" && value != "real") (void)parse_architecture(value);
        c.architecture = value;
    } else if (key == "optimizer") {
        t.optimizer = parse_optimizer(value);
    } else if (key == "learning_rate") {
        c.auto_learning_rate = value == "auto";
        if (!c.auto_learning_rate) t.learning_rate = parse_number(key, value);
    } else if (key == "momentum") {
        t.momentum = parse_number(key, value);
    } else if (key == "nesterov") {
        t.nesterov = parse_bool(key, value);
    } else if (key == "decay") {
        t.decay = parse_number(key, value);
    } else if (key == "adam_beta1") {
        t.adam_beta1 = parse_number(key, value);
    } else if (key == "adam_beta2") {
        t.adam_beta2 = parse_number(key, value);
    } else if (key == "adam_epsilon") {
        t.adam_epsilon = parse_number(key, value);
    } else if (key == "batch_size") {
        t.batch_size = parse_count(key, value);
    } else if (key == "epochs") {
        t.epochs = parse_count(key, value);
    } else if (key == "l2_weight_penalty") {
        t.l2_weight_penalty = parse_number(key, value);
    } else if (key == "activity_penalty") {
        t.activity_penalty = parse_number(key, value);
    } else if (key == "average_rank_term") {
        t.average_rank_term = parse_bool(key, value);
    } else if (key == "pairs_per_event") {
        c.auto_pairs = value == "auto";
        if (!c.auto_pairs) t.pairs_per_event = parse_count(key, value);
    } else if (key == "train_seed") {
        t.seed = parse_count(key, value);
    } else if (key == "centering") {
        c.centering = parse_centering(value);
    } else if (key == "bandwidth") {
        if (value == "quadratic") {
            c.smoothing.form = BandwidthForm::quadratic;
        } else if (value == "root") {
            c.smoothing.form = BandwidthForm::root;
        } else {
            throw SchemaError("config: bandwidth must be quadratic or root");
        }
    } else if (key == "bandwidth_scale") {
        c.smoothing.scale = parse_number(key, value);
    } else {
        throw SchemaError("config: unknown key '" + key + "'");
    }
}

ExperimentConfig parse_experiment_config(const std::string& text) {
    std::istringstream in(text);
    ExperimentConfig config;
    for (const auto& [key, value] : read_key_values(in, "config")) set_config_value(config, key, value);
    config.train.validate();
    return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_experiment_config(buffer.str());
}

std::string format_experiment_config(const ExperimentConfig& c) {
    const auto& t = c.train;
    const auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    std::ostringstream out;
    out << "# scenario\n";
    out << "mean_kinds = " << join(c.mean_kinds, [](MeanKind k) { return to_string(k); }) << '\n';
    out << "error_dists = " << join(c.error_dists, [](ErrorDist d) { return to_string(d); }) << '\n';
    out << "taus = " << join(c.taus, format_double) << '\n';
    out << "n_trains = " << join(c.n_trains, [](std::size_t n) { return std::to_string(n); }) << '\n';
    out << "n_test = " << c.n_test << '\n';
    out << "noise_dims = " << c.noise_dims << '\n';
    out << "replicates = " << c.replicates << '\n';
    out << "seed = " << c.seed << '\n';
    out << "methods = " << join(c.methods, [](Method m) { return to_string(m); }) << '\n';
    out << "# architecture\n";
    out << "architecture = " << c.architecture << '\n';
    out << "# optimizer\n";
    out << "optimizer = " << to_string(t.optimizer) << '\n';
    out << "learning_rate = " << (c.auto_learning_rate ? "auto" : format_double(t.learning_rate)) << '\n';
    out << "momentum = " << format_double(t.momentum) << '\n';
    out << "nesterov = " << b(t.nesterov) << '\n';
    out << "decay = " << format_double(t.decay) << '\n';
    out << "adam_beta1 = " << format_double(t.adam_beta1) << '\n';
    out << "adam_beta2 = " << format_double(t.adam_beta2) << '\n';
    out << "adam_epsilon = " << format_double(t.adam_epsilon) << '\n';
    out << "batch_size = " << t.batch_size << '\n';
    out << "epochs = " << t.epochs << '\n';
    out << "l2_weight_penalty = " << format_double(t.l2_weight_penalty) << '\n';
    out << "activity_penalty = " << format_double(t.activity_penalty) << '\n';
    out << "average_rank_term = " << b(t.average_rank_term) << '\n';
    out << "pairs_per_event = " << (c.auto_pairs ? "auto" : std::to_string(t.pairs_per_event)) << '\n';
    out << "train_seed = " << t.seed << '\n';
    out << "# estimation\n";
    out << "centering = " << to_string(c.centering) << '\n';
    out << "bandwidth = " << (c.smoothing.form == BandwidthForm::root ? "root" : "quadratic") << '\n';
    out << "bandwidth_scale = " << format_double(c.smoothing.scale) << '\n';
    return out.str();
}

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys{
        {"mean_kinds", "mean functions: interaction, gam, linear (comma list)"},
        {"error_dists", "error laws: gaussian, gumbel, laplace, t3 (comma list)"},
        {"taus", "censoring scales tau (comma list)"},
        {"n_trains", "training sizes (comma list)"},
        {"n_test", "test size"},
        {"noise_dims", "number of pure-noise covariates K"},
        {"replicates", "replicates per scenario"},
        {"seed", "scenario seed"},
        {"methods", "methods: deepr, paft, saft (comma list)"},
        {"architecture", "auto, real, or e.g. 128:relu,32:relu,16:relu,1:linear"},
        {"optimizer", "sgd or adam"},
        {"learning_rate", "auto or a number"},
        {"momentum", "SGD momentum"},
        {"nesterov", "Nesterov momentum (true/false)"},
        {"decay", "learning-rate decay: lr / (1 + decay * t)"},
        {"adam_beta1", "Adam first-moment rate"},
        {"adam_beta2", "Adam second-moment rate"},
        {"adam_epsilon", "Adam epsilon"},
        {"batch_size", "pairs per minibatch"},
        {"epochs", "passes over the sampled pairs"},
        {"l2_weight_penalty", "L2 weight penalty"},
        {"activity_penalty", "hidden-activation L2 penalty"},
        {"average_rank_term", "average the rank term over the batch (true/false)"},
        {"pairs_per_event", "auto or partners per event subject"},
        {"train_seed", "seed for initialisation and pair sampling"},
        {"centering", "location offset: kaplan_meier or event_mean"},
        {"bandwidth", "SAFT bandwidth form: quadratic or root"},
        {"bandwidth_scale", "SAFT bandwidth multiplier"},
    };
    return keys;
}

std::string config_hash(const ExperimentConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char ch : format_experiment_config(config)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

namespace {

void put_f64(std::ostream& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int k = 0; k < 8; ++k) bytes[k] = static_cast<char>((bits >> (8 * k)) & 0xFF);
    out.write(bytes, 8);
}

double get_f64(std::istream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    if (in.gcount() != 8) throw SchemaError("model file: truncated payload");
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
    return std::bit_cast<double>(bits);
}

}  // namespace

void save_model(const std::filesystem::path& path, const ModelFile& model) {
    model.params.validate();
    auto out = open_output(path, std::ios::out | std::ios::binary);
    out << "deepraft-model " << kModelFormatVersion << '\n';
    out << "method " << (model.method.empty() ? "unknown" : model.method) << '\n';
    out << "input_dim " << model.params.input_dim << '\n';
    out << "layers " << model.params.layers.size() << '\n';
    for (const auto& l : model.params.layers) {
        out << "layer " << l.weight.rows() << ' ' << l.weight.cols() << ' ' << to_string(l.activation) << '\n';
    }
    out << "standardize " << model.standardizer.columns.size() << '\n';
    for (std::size_t k = 0; k < model.standardizer.columns.size(); ++k) {
        out << "column " << model.standardizer.columns[k] << ' ' << format_hex(model.standardizer.mean[k]) << ' '
            << format_hex(model.standardizer.sd[k]) << '\n';
    }
    out << "payload float64-le " << model.params.parameter_count() << '\n';
    out << "end\n";
    for (const auto& l : model.params.layers) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) put_f64(out, l.weight(r, c));
        }
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) put_f64(out, l.bias[r]);
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

ModelFile load_model(const std::filesystem::path& path) {
    auto in = open_input(path, std::ios::in | std::ios::binary);
    const auto expect = [&](const std::string& word) {
        std::string line;
        if (!std::getline(in, line)) throw SchemaError("model file: unexpected end of header");
        std::istringstream ls(line);
        std::string got;
        ls >> got;
        if (got != word) throw SchemaError("model file: expected '" + word + "', found '" + got + "'");
        std::vector<std::string> rest;
        std::string tok;
        while (ls >> tok) rest.push_back(tok);
        return rest;
    };
    const auto version = expect("deepraft-model");
    if (version.size() != 1 || version[0] != std::to_string(kModelFormatVersion)) {
        throw SchemaError("model file: unsupported version");
    }
    ModelFile model;
    const auto method = expect("method");
    model.method = method.empty() ? "" : method[0];
    const auto to_count = [](const std::string& s) { return static_cast<std::size_t>(parse_count("model file", s)); };
    model.params.input_dim = to_count(expect("input_dim").at(0));
    const std::size_t depth = to_count(expect("layers").at(0));
    for (std::size_t l = 0; l < depth; ++l) {
        const auto f = expect("layer");
        if (f.size() != 3) throw SchemaError("model file: malformed layer line");
        const auto rows = static_cast<Eigen::Index>(to_count(f[0]));
        const auto cols = static_cast<Eigen::Index>(to_count(f[1]));
        model.params.layers.push_back({Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows), parse_activation(f[2])});
    }
    const std::size_t standardized = to_count(expect("standardize").at(0));
    for (std::size_t k = 0; k < standardized; ++k) {
        const auto f = expect("column");
        if (f.size() != 3) throw SchemaError("model file: malformed column line");
        model.standardizer.columns.push_back(to_count(f[0]));
        model.standardizer.mean.push_back(parse_hex(f[1]));
        model.standardizer.sd.push_back(parse_hex(f[2]));
    }
    const auto payload = expect("payload");
    if (payload.size() != 2 || payload[0] != "float64-le") throw SchemaError("model file: unknown payload encoding");
    (void)expect("end");
    for (auto& l : model.params.layers) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = get_f64(in);
        }
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = get_f64(in);
    }
    model.params.validate();
    if (to_count(payload[1]) != model.params.parameter_count()) throw SchemaError("model file: payload count mismatch");
    return model;
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

namespace {

struct ColumnKey {
    std::size_t n_train;
    Method method;
};

std::vector<ColumnKey> result_columns(const std::vector<ScenarioResult>& results) {
    std::vector<std::size_t> sizes;
    std::vector<Method> methods;
    for (const auto& r : results) {
        if (std::find(sizes.begin(), sizes.end(), r.scenario.n_train) == sizes.end()) sizes.push_back(r.scenario.n_train);
        for (const auto& m : r.methods) {
            if (std::find(methods.begin(), methods.end(), m.method) == methods.end()) methods.push_back(m.method);
        }
    }
    std::sort(sizes.rbegin(), sizes.rend());
    std::vector<ColumnKey> cols;
    for (const auto n : sizes) {
        for (const auto m : methods) cols.push_back({n, m});
    }
    return cols;
}

struct RowKey {
    MeanKind kind;
    ErrorDist dist;
    double tau;
    std::size_t noise_dims;
    friend bool operator==(const RowKey&, const RowKey&) = default;
};

std::vector<RowKey> result_rows(const std::vector<ScenarioResult>& results) {
    std::vector<RowKey> rows;
    for (const auto& r : results) {
        const RowKey key{r.scenario.mean_kind, r.scenario.error_dist, r.scenario.tau, r.scenario.noise_dims};
        if (std::find(rows.begin(), rows.end(), key) == rows.end()) rows.push_back(key);
    }
    return rows;
}

const MethodSummary* find_cell(const std::vector<ScenarioResult>& results, const RowKey& row, const ColumnKey& col) {
    for (const auto& r : results) {
        const RowKey key{r.scenario.mean_kind, r.scenario.error_dist, r.scenario.tau, r.scenario.noise_dims};
        if (!(key == row) || r.scenario.n_train != col.n_train) continue;
        for (const auto& m : r.methods) {
            if (m.method == col.method) return &m;
        }
    }
    return nullptr;
}

std::string column_name(const ColumnKey& c, const char* metric) {
    return display_name(c.method) + "@" + std::to_string(c.n_train) + ":" + metric;
}

}  // namespace

std::string format_results(const std::vector<ScenarioResult>& results, ResultFormat format,
                           const ResultMetadata& meta) {
    const auto cols = result_columns(results);
    const auto rows = result_rows(results);
    std::ostringstream out;
    out << "# config_hash=" << (meta.config_hash.empty() ? "none" : meta.config_hash) << '\n';
    out << "# seed=" << meta.seed << '\n';
    out << "# replicates=" << meta.replicates << '\n';

    if (format == ResultFormat::csv) {
        out << "mean_kind,error_dist,tau,noise_dims";
        for (const auto& c : cols) out << ',' << column_name(c, "mse") << ',' << column_name(c, "c_index");
        out << '\n';
        for (const auto& row : rows) {
            out << to_string(row.kind) << ',' << to_string(row.dist) << ',' << format_double(row.tau) << ','
                << row.noise_dims;
            for (const auto& c : cols) {
                const auto* cell = find_cell(results, row, c);
                if (cell) {
                    out << ',' << format_double(cell->mean_mse()) << ',' << format_double(cell->mean_c_index());
                } else {
                    out << ",,";
                }
            }
            out << '\n';
        }
        return out.str();
    }

    // aligned text, one block per mean function, "MSE (C-index)" cells
    constexpr int key_width = 10;
    constexpr int cell_width = 17;
    std::vector<MeanKind> kinds;
    for (const auto& r : rows) {
        if (std::find(kinds.begin(), kinds.end(), r.kind) == kinds.end()) kinds.push_back(r.kind);
    }
    for (const auto kind : kinds) {
        out << "\nmean function: " << to_string(kind) << '\n';
        out << std::left << std::setw(key_width) << "" << std::setw(key_width) << "";
        for (const auto& c : cols) out << std::setw(cell_width) << ("n = " + std::to_string(c.n_train));
        out << '\n' << std::setw(key_width) << "error" << std::setw(key_width) << "tau";
        for (const auto& c : cols) out << std::setw(cell_width) << display_name(c.method);
        out << '\n';
        for (const auto& row : rows) {
            if (row.kind != kind) continue;
            std::string tau = format_double(row.tau);
            if (row.noise_dims) tau += " K=" + std::to_string(row.noise_dims);
            out << std::setw(key_width) << to_string(row.dist) << std::setw(key_width) << tau;
            for (const auto& c : cols) {
                const auto* cell = find_cell(results, row, c);
                char buf[64] = "-";
                if (cell) std::snprintf(buf, sizeof buf, "%.3f (%.3f)", cell->mean_mse(), cell->mean_c_index());
                out << std::setw(cell_width) << buf;
            }
            out << '\n';
        }
    }
    return out.str();
}

void emit_results(const std::filesystem::path& path, const std::vector<ScenarioResult>& results, ResultFormat format,
                  const ResultMetadata& meta) {
    auto out = open_output(path);
    out << format_results(results, format, meta);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

ParsedResults parse_results_csv(const std::string& text) {
    ParsedResults parsed;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto body = trim(line.substr(1));
            const auto eq = body.find('=');
            if (eq != std::string::npos) parsed.metadata[trim(body.substr(0, eq))] = trim(body.substr(eq + 1));
            continue;
        }
        const auto fields = split_csv_line(line);
        if (parsed.header.empty()) {
            parsed.header = fields;
            if (parsed.header.size() < 4 || parsed.header[0] != "mean_kind") throw SchemaError("results: bad header");
            continue;
        }
        if (fields.size() != parsed.header.size()) throw SchemaError("results: ragged row");
        ResultRow row;
        row.mean_kind = fields[0];
        row.error_dist = fields[1];
        row.tau = parse_number("tau", fields[2]);
        for (std::size_t k = 4; k < fields.size(); ++k) {
            if (!fields[k].empty()) row.cells[parsed.header[k]] = parse_number(parsed.header[k], fields[k]);
        }
        parsed.rows.push_back(std::move(row));
    }
    return parsed;
}

}  // namespace deepraft
