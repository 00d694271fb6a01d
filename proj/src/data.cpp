#include "tblm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tblm/rng.hpp"

namespace tblm {

void Dataset::push_back(std::span<const double> in, std::span<const double> out) {
    if (in.size() != n_inputs || out.size() != n_outputs) throw std::invalid_argument("row shape mismatch");
    inputs.insert(inputs.end(), in.begin(), in.end());
    targets.insert(targets.end(), out.begin(), out.end());
}

namespace {

void fit_columns(std::span<const double> m, std::size_t cols, double lo, double hi, std::vector<double>& scale,
                 std::vector<double>& offset, std::vector<std::string>* warnings, std::string_view what) {
    scale.assign(cols, 0.0);
    offset.assign(cols, 0.0);
    const std::size_t rows = m.size() / cols;
    for (std::size_t c = 0; c < cols; ++c) {
        double mn = m[c], mx = m[c];
        for (std::size_t r = 1; r < rows; ++r) {
            mn = std::min(mn, m[r * cols + c]);
            mx = std::max(mx, m[r * cols + c]);
        }
        if (mx > mn) {
            scale[c] = (hi - lo) / (mx - mn);
            offset[c] = lo - mn * scale[c];
        } else if (warnings) {
            warnings->push_back(std::string(what) + " column " + std::to_string(c) + " is constant; mapped to 0");
        }
    }
}

void apply_columns(std::vector<double>& m, std::size_t cols, const std::vector<double>& scale,
                   const std::vector<double>& offset) {
    for (std::size_t i = 0; i < m.size(); ++i) {
        const std::size_t c = i % cols;
        m[i] = m[i] * scale[c] + offset[c];
    }
}

}  // namespace

NormalizationParams fit_normalization(const Dataset& train, std::vector<std::string>* warnings) {
    if (train.size() == 0) throw std::invalid_argument("cannot fit normalization on an empty set");
    NormalizationParams p;
    fit_columns(train.inputs, train.n_inputs, -1.0, 1.0, p.input_scale, p.input_offset, warnings, "input");
    if (train.kind == TaskKind::regression) {
        fit_columns(train.targets, train.n_outputs, 0.0, 1.0, p.output_scale, p.output_offset, warnings, "target");
    } else {
        p.output_scale.assign(train.n_outputs, 1.0);
        p.output_offset.assign(train.n_outputs, 0.0);
    }
    return p;
}

void NormalizationParams::apply(Dataset& d) const {
    if (input_scale.size() != d.n_inputs || output_scale.size() != d.n_outputs)
        throw std::invalid_argument("normalization parameters do not match dataset shape");
    apply_columns(d.inputs, d.n_inputs, input_scale, input_offset);
    apply_columns(d.targets, d.n_outputs, output_scale, output_offset);
}

std::vector<double> NormalizationParams::denormalize_targets(std::span<const double> normalized) const {
    const std::size_t cols = output_scale.size();
    std::vector<double> out(normalized.begin(), normalized.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::size_t c = i % cols;
        // constant columns cannot be inverted; they carry no information
        out[i] = output_scale[c] != 0.0 ? (out[i] - output_offset[c]) / output_scale[c] : 0.0;
    }
    return out;
}

SplitResult normalize_split(const Dataset& data, double train_fraction, Rng& rng) {
    const std::size_t n = data.size();
    if (n == 0) throw std::invalid_argument("cannot split an empty dataset");
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw std::invalid_argument("train fraction must be in (0, 1]");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n);

    SplitResult out;
    for (Dataset* d : {&out.train, &out.validation}) {
        d->n_inputs = data.n_inputs;
        d->n_outputs = data.n_outputs;
        d->input_names = data.input_names;
        d->output_names = data.output_names;
        d->kind = data.kind;
        d->n_classes = data.n_classes;
    }
    for (std::size_t r = 0; r < n; ++r) (r < n_train ? out.train : out.validation).push_back(data.input(order[r]), data.target(order[r]));
    out.params = fit_normalization(out.train, &out.warnings);
    out.params.apply(out.train);
    if (out.validation.size() > 0) out.params.apply(out.validation);
    return out;
}

Dataset two_spirals_raw(double phase) {
    Dataset d;
    d.n_inputs = 2;
    d.n_outputs = 1;
    d.input_names = {"x", "y"};
    d.output_names = {"spiral"};
    d.kind = TaskKind::classification;
    d.n_classes = 2;
    for (int i = 0; i <= 96; ++i) {
        const double r = 6.5 * (104 - i) / 104.0;
        const double a = i * std::numbers::pi / 16.0 + phase;
        const double x = r * std::sin(a), y = r * std::cos(a);
        const double p1[2] = {x, y}, p2[2] = {-x, -y};
        const double one = 1.0, zero = 0.0;
        d.push_back(p1, {&one, 1});
        d.push_back(p2, {&zero, 1});
    }
    return d;
}

TwoSpirals two_spirals() {
    TwoSpirals s{two_spirals_raw(0.0), two_spirals_raw(std::numbers::pi / 32.0)};
    const auto params = fit_normalization(s.train);
    params.apply(s.train);
    params.apply(s.test);
    return s;
}

std::vector<ColumnRole> parse_schema(std::string_view schema) {
    std::vector<ColumnRole> roles;
    std::size_t pos = 0;
    while (pos <= schema.size()) {
        std::size_t comma = schema.find(',', pos);
        if (comma == std::string_view::npos) comma = schema.size();
        std::string_view tok = schema.substr(pos, comma - pos);
        while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
        while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
        if (tok == "input" || tok == "num") roles.push_back(ColumnRole::input);
        else if (tok == "nominal" || tok == "nom") roles.push_back(ColumnRole::nominal);
        else if (tok == "target" || tok == "out") roles.push_back(ColumnRole::target);
        else if (tok == "class") roles.push_back(ColumnRole::class_label);
        else if (tok == "skip" || tok == "-") roles.push_back(ColumnRole::skip);
        else throw std::invalid_argument("unknown column role '" + std::string(tok) + "' in schema");
        pos = comma + 1;
    }
    return roles;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    cells.push_back(cur);
    for (auto& c : cells) {
        const auto b = c.find_first_not_of(" \t");
        const auto e = c.find_last_not_of(" \t");
        c = b == std::string::npos ? std::string{} : c.substr(b, e - b + 1);
    }
    return cells;
}

[[noreturn]] void csv_error(std::string_view source, std::size_t row, std::size_t col, const std::string& msg) {
    throw std::runtime_error(std::string(source) + ": row " + std::to_string(row) + ", column " +
                             std::to_string(col + 1) + ": " + msg);
}

}  // namespace

Dataset parse_csv(std::string_view text, std::span<const ColumnRole> roles, std::string_view source) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(std::string(source) + ": missing header row");
    const auto header = split_line(line);
    if (header.size() != roles.size())
        throw std::runtime_error(std::string(source) + ": header has " + std::to_string(header.size()) +
                                 " columns but schema lists " + std::to_string(roles.size()));
    std::size_t n_class_cols = 0;
    for (auto r : roles) n_class_cols += r == ColumnRole::class_label ? 1 : 0;
    if (n_class_cols > 1) throw std::invalid_argument("at most one class column is supported");

    std::vector<std::vector<std::string>> rows;
    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty() || line == "\r") continue;
        auto cells = split_line(line);
        if (cells.size() != roles.size())
            csv_error(source, row_no, std::min(cells.size(), roles.size()),
                      "expected " + std::to_string(roles.size()) + " cells, found " + std::to_string(cells.size()));
        for (std::size_t c = 0; c < cells.size(); ++c)
            if (cells[c].empty() && roles[c] != ColumnRole::skip) csv_error(source, row_no, c, "missing value");
        rows.push_back(std::move(cells));
    }
    if (rows.empty()) throw std::runtime_error(std::string(source) + ": no data rows");

    // Levels of nominal and class columns, sorted for a stable encoding.
    std::map<std::size_t, std::vector<std::string>> levels;
    for (std::size_t c = 0; c < roles.size(); ++c) {
        if (roles[c] != ColumnRole::nominal && roles[c] != ColumnRole::class_label) continue;
        std::vector<std::string> lv;
        for (const auto& r : rows) lv.push_back(r[c]);
        std::sort(lv.begin(), lv.end());
        lv.erase(std::unique(lv.begin(), lv.end()), lv.end());
        levels[c] = std::move(lv);
    }

    Dataset d;
    d.kind = n_class_cols ? TaskKind::classification : TaskKind::regression;
    for (std::size_t c = 0; c < roles.size(); ++c) {
        switch (roles[c]) {
            case ColumnRole::input: d.input_names.push_back(header[c]); break;
            case ColumnRole::nominal:
                for (const auto& lv : levels[c]) d.input_names.push_back(header[c] + "=" + lv);
                break;
            case ColumnRole::target: d.output_names.push_back(header[c]); break;
            case ColumnRole::class_label:
                for (const auto& lv : levels[c]) d.output_names.push_back(header[c] + "=" + lv);
                d.n_classes = levels[c].size();
                break;
            case ColumnRole::skip: break;
        }
    }
    d.n_inputs = d.input_names.size();
    d.n_outputs = d.output_names.size();
    if (d.n_inputs == 0 || d.n_outputs == 0) throw std::invalid_argument("schema must name at least one input and one output");
    if (n_class_cols && d.n_outputs != d.n_classes)
        throw std::invalid_argument("class column cannot be combined with numeric targets");

    std::vector<double> in_row, out_row;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        in_row.clear();
        out_row.clear();
        for (std::size_t c = 0; c < roles.size(); ++c) {
            const std::string& cell = rows[r][c];
            if (roles[c] == ColumnRole::input || roles[c] == ColumnRole::target) {
                double v = 0.0;
                const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                if (ec != std::errc{} || end != cell.data() + cell.size() || !std::isfinite(v))
                    csv_error(source, r + 2, c, "cannot parse '" + cell + "' as a number");
                (roles[c] == ColumnRole::input ? in_row : out_row).push_back(v);
            } else if (roles[c] == ColumnRole::nominal || roles[c] == ColumnRole::class_label) {
                const bool nominal = roles[c] == ColumnRole::nominal;
                for (const auto& lv : levels[c]) {
                    const bool hit = lv == cell;
                    if (nominal)
                        in_row.push_back(hit ? 1.0 : -1.0);
                    else
                        out_row.push_back(hit ? 1.0 : 0.0);
                }
            }
        }
        d.push_back(in_row, out_row);
    }
    return d;
}

Dataset load_csv(const std::filesystem::path& path, std::span<const ColumnRole> roles) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open CSV file " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_csv(ss.str(), roles, path.string());
}

void write_csv(const Dataset& d, const std::filesystem::path& path, std::string_view header_comment) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    if (!header_comment.empty()) f << "# " << header_comment << '\n';
    std::vector<std::string> names = d.input_names;
    names.insert(names.end(), d.output_names.begin(), d.output_names.end());
    for (std::size_t i = 0; i < names.size(); ++i) f << (i ? "," : "") << names[i];
    f << '\n';
    f.precision(17);
    for (std::size_t r = 0; r < d.size(); ++r) {
        for (std::size_t c = 0; c < d.n_inputs; ++c) f << (c ? "," : "") << d.inputs[r * d.n_inputs + c];
        for (std::size_t c = 0; c < d.n_outputs; ++c) f << ',' << d.targets[r * d.n_outputs + c];
        f << '\n';
    }
    if (!f) throw std::runtime_error("I/O error writing " + path.string());
}

}  // namespace tblm
