#include "mvi/viz.hpp"

#include "mvi/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

namespace mvi {

std::string_view to_string(PlotKind k) {
    switch (k) {
    case PlotKind::Aggregation: return "aggregation";
    case PlotKind::Matrix: return "matrix";
    case PlotKind::ParallelBox: return "parallelbox";
    }
    return "?";
}

PlotKind parse_plot_kind(std::string_view s) {
    for (auto k : {PlotKind::Aggregation, PlotKind::Matrix, PlotKind::ParallelBox})
        if (s == to_string(k)) return k;
    throw Error(Errc::InvalidValue, "unknown plot kind '" + std::string(s) + "'");
}

namespace {

void check_shape(const Dataset& ds, const MissingMask& mask) {
    if (mask.rows() != ds.rows() || mask.cols() != ds.cols()) throw Error(Errc::ShapeMismatch, "mask shape differs from data");
}

std::string escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string gray(int level) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", level, level, level);
    return buf;
}

std::string missing_color(const PlotSpec& spec) { return spec.black_and_white ? gray(20) : spec.highlight_color; }

// Observed cells map to 235 (lowest) .. 60 (highest); missing stays distinct at 20 in b/w mode.
std::string value_color(double unit) { return gray(static_cast<int>(std::lround(235.0 - 175.0 * std::clamp(unit, 0.0, 1.0)))); }

std::string header(const PlotSpec& spec, std::string_view kind) {
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
      << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height << "\" data-kind=\"" << kind << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << spec.width << "\" height=\"" << spec.height << "\" fill=\"#ffffff\"/>\n";
    return o.str();
}

std::string text(double x, double y, std::string_view s, std::string_view anchor = "middle", int size = 11) {
    std::ostringstream o;
    o << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-family=\"sans-serif\" font-size=\"" << size
      << "\" text-anchor=\"" << anchor << "\">" << escape(s) << "</text>\n";
    return o.str();
}

bool ordinal(const Dataset& ds, std::size_t c, const PlotSpec& spec) {
    return !ds.is_categorical(c) || spec.ordinal_columns.count(ds.column(c).name) > 0;
}

std::size_t column_index(const Dataset& ds, std::string_view name, Errc err) {
    auto c = ds.find_column(name);
    if (!c) throw Error(err, "unknown column '" + std::string(name) + "'");
    return *c;
}

}  // namespace

AggregationData aggregation_data(const Dataset& ds, const MissingMask& mask) {
    check_shape(ds, mask);
    AggregationData out;
    out.column_rates.assign(ds.cols(), 0.0);
    std::map<std::vector<bool>, std::size_t> counts;
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        std::vector<bool> sig(ds.cols());
        for (std::size_t c = 0; c < ds.cols(); ++c) sig[c] = mask.at(r, c);
        ++counts[sig];
    }
    if (ds.rows() == 0) return out;
    const double n = static_cast<double>(ds.rows());
    for (std::size_t c = 0; c < ds.cols(); ++c) out.column_rates[c] = static_cast<double>(mask.column_count(c)) / n;
    for (const auto& [sig, count] : counts) out.signatures.push_back({sig, count, static_cast<double>(count) / n});
    std::stable_sort(out.signatures.begin(), out.signatures.end(),
                     [](const Signature& a, const Signature& b) { return a.count > b.count; });
    return out;
}

double quantile_linear(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw Error(Errc::EmptyInput, "quantile of an empty list");
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BoxStats box_stats(std::vector<double> values) {
    if (values.empty()) throw Error(Errc::EmptyInput, "box of an empty group");
    std::sort(values.begin(), values.end());
    BoxStats b;
    b.n = values.size();
    b.min = values.front();
    b.max = values.back();
    b.q1 = quantile_linear(values, 0.25);
    b.median = quantile_linear(values, 0.5);
    b.q3 = quantile_linear(values, 0.75);
    const double iqr = b.q3 - b.q1;
    const double lo_fence = b.q1 - 1.5 * iqr, hi_fence = b.q3 + 1.5 * iqr;
    b.whisker_low = b.q1;
    b.whisker_high = b.q3;
    for (double v : values) {
        if (v < lo_fence || v > hi_fence) {
            b.outliers.push_back(v);
            continue;
        }
        b.whisker_low = std::min(b.whisker_low, v);
        b.whisker_high = std::max(b.whisker_high, v);
    }
    return b;
}

std::vector<BoxGroup> parallel_box_groups(const Dataset& ds, const MissingMask& mask, std::string_view column,
                                          const PlotSpec& spec) {
    check_shape(ds, mask);
    const std::size_t col = column_index(ds, column, Errc::InvalidValue);
    if (!ordinal(ds, col, spec)) throw Error(Errc::NonNumericColumn, "column '" + std::string(column) + "' is nominal");

    auto values_where = [&](auto&& keep) {
        std::vector<double> v;
        for (std::size_t r = 0; r < ds.rows(); ++r)
            if (!mask.at(r, col) && !is_missing(ds.at(r, col)) && keep(r)) v.push_back(ds.at(r, col));
        return v;
    };
    std::vector<BoxGroup> groups;
    groups.push_back({"all", std::nullopt, false, values_where([](std::size_t) { return true; }), {}});
    for (std::size_t c = 0; c < ds.cols(); ++c) {
        if (c == col || mask.column_count(c) == 0) continue;
        const auto& name = ds.column(c).name;
        groups.push_back({name + " missing", c, true, values_where([&](std::size_t r) { return mask.at(r, c); }), {}});
        groups.push_back({name + " observed", c, false, values_where([&](std::size_t r) { return !mask.at(r, c); }), {}});
    }
    for (auto& g : groups)
        if (!g.values.empty()) g.stats = box_stats(g.values);
    return groups;
}

std::vector<std::size_t> matrix_columns(const Dataset& ds, const PlotSpec& spec) {
    std::vector<std::size_t> cols;
    if (spec.columns.empty()) {
        for (std::size_t c = 0; c < ds.cols(); ++c)
            if (ordinal(ds, c, spec)) cols.push_back(c);
    } else {
        for (const auto& name : spec.columns) {
            const std::size_t c = column_index(ds, name, Errc::InvalidValue);
            if (!ordinal(ds, c, spec))
                throw Error(Errc::NominalColumn, "matrix plot cannot show nominal column '" + name + "'");
            cols.push_back(c);
        }
    }
    if (cols.empty()) throw Error(Errc::NominalColumn, "no numeric or ordinal column to plot");
    return cols;
}

std::vector<std::size_t> matrix_row_order(const Dataset& ds, const PlotSpec& spec) {
    std::size_t key = 0;
    if (spec.sort_by) {
        auto c = ds.find_column(*spec.sort_by);
        if (!c) throw Error(Errc::UnknownSortColumn, "unknown sort column '" + *spec.sort_by + "'");
        key = *c;
    } else {
        key = matrix_columns(ds, spec).front();
    }
    std::vector<std::size_t> order(ds.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double va = ds.at(a, key), vb = ds.at(b, key);
        if (is_missing(va) || is_missing(vb)) return !is_missing(va) && is_missing(vb);
        return spec.sort_descending ? va > vb : va < vb;
    });
    return order;
}

std::string aggregation_plot(const Dataset& ds, const MissingMask& mask, const PlotSpec& spec) {
    const auto agg = aggregation_data(ds, mask);
    std::ostringstream o;
    o << header(spec, "aggregation");
    const double margin = 40.0, label_h = 60.0;
    const double panel_w = (spec.width - 3.0 * margin) / 2.0;
    const double plot_h = spec.height - margin - label_h;
    const double k = static_cast<double>(std::max<std::size_t>(1, ds.cols()));
    const double slot = panel_w / k;

    // Left: missing rate per column.
    o << "<g class=\"bars\">\n";
    o << text(margin + panel_w / 2.0, margin / 2.0, "Missing rate per column");
    for (std::size_t c = 0; c < ds.cols(); ++c) {
        const double h = agg.column_rates[c] * plot_h;
        const double x = margin + static_cast<double>(c) * slot;
        o << "<rect class=\"bar\" data-column=\"" << escape(ds.column(c).name) << "\" data-rate=\""
          << format_double(agg.column_rates[c]) << "\" x=\"" << num(x + slot * 0.1) << "\" y=\"" << num(margin + plot_h - h)
          << "\" width=\"" << num(slot * 0.8) << "\" height=\"" << num(h) << "\" fill=\"" << missing_color(spec) << "\"/>\n";
        o << text(x + slot / 2.0, margin + plot_h + 14.0, ds.column(c).name);
    }
    o << "<line x1=\"" << num(margin) << "\" y1=\"" << num(margin + plot_h) << "\" x2=\"" << num(margin + panel_w)
      << "\" y2=\"" << num(margin + plot_h) << "\" stroke=\"#000000\"/>\n";
    o << "</g>\n";

    // Right: one row per missingness signature, most frequent on top.
    const double x0 = 2.0 * margin + panel_w;
    const double row_h = agg.signatures.empty() ? 0.0 : plot_h / static_cast<double>(agg.signatures.size());
    o << "<g class=\"combinations\">\n";
    o << text(x0 + panel_w / 2.0, margin / 2.0, "Combinations");
    for (std::size_t s = 0; s < agg.signatures.size(); ++s) {
        const auto& sig = agg.signatures[s];
        std::string bits;
        for (bool b : sig.missing) bits += b ? '1' : '0';
        const double y = margin + static_cast<double>(s) * row_h;
        o << "<g class=\"signature\" data-signature=\"" << bits << "\" data-count=\"" << sig.count
          << "\" data-frequency=\"" << format_double(sig.frequency) << "\">\n";
        for (std::size_t c = 0; c < sig.missing.size(); ++c)
            o << "<rect x=\"" << num(x0 + static_cast<double>(c) * slot) << "\" y=\"" << num(y) << "\" width=\""
              << num(slot) << "\" height=\"" << num(row_h) << "\" fill=\""
              << (sig.missing[c] ? missing_color(spec) : gray(200)) << "\" stroke=\"#ffffff\"/>\n";
        o << text(x0 + panel_w + 4.0, y + row_h / 2.0 + 4.0, format_double(std::round(sig.frequency * 1000.0) / 1000.0),
                  "start", 9);
        o << "</g>\n";
    }
    for (std::size_t c = 0; c < ds.cols(); ++c)
        o << text(x0 + (static_cast<double>(c) + 0.5) * slot, margin + plot_h + 14.0, ds.column(c).name);
    o << "</g>\n</svg>\n";
    return o.str();
}

std::string matrix_plot(const Dataset& ds, const MissingMask& mask, const PlotSpec& spec) {
    check_shape(ds, mask);
    const auto cols = matrix_columns(ds, spec);
    const auto order = matrix_row_order(ds, spec);

    std::vector<double> lo(ds.cols(), 0.0), span(ds.cols(), 0.0);
    for (std::size_t c : cols) {
        double mn = std::numeric_limits<double>::infinity(), mx = -mn;
        for (std::size_t r = 0; r < ds.rows(); ++r) {
            const double v = ds.at(r, c);
            if (mask.at(r, c) || is_missing(v)) continue;
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        lo[c] = std::isfinite(mn) ? mn : 0.0;
        span[c] = std::isfinite(mn) && mx > mn ? mx - mn : 0.0;
    }

    std::ostringstream o;
    o << header(spec, "matrix");
    const double margin = 40.0;
    const double plot_w = spec.width - 2.0 * margin;
    const double plot_h = spec.height - 2.0 * margin;
    const double cell_w = plot_w / static_cast<double>(cols.size());
    const double cell_h = ds.rows() ? plot_h / static_cast<double>(ds.rows()) : 0.0;
    for (std::size_t j = 0; j < cols.size(); ++j)
        o << text(margin + (static_cast<double>(j) + 0.5) * cell_w, margin - 8.0, ds.column(cols[j]).name);
    o << "<g class=\"cells\" shape-rendering=\"crispEdges\">\n";
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::size_t r = order[i];
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const std::size_t c = cols[j];
            const bool miss = mask.at(r, c) || is_missing(ds.at(r, c));
            const std::string fill =
                miss ? missing_color(spec) : value_color(span[c] > 0.0 ? (ds.at(r, c) - lo[c]) / span[c] : 0.0);
            o << "<rect class=\"" << (miss ? "cell missing" : "cell") << "\" data-row=\"" << r << "\" data-col=\""
              << c << "\" x=\"" << num(margin + static_cast<double>(j) * cell_w) << "\" y=\""
              << num(margin + static_cast<double>(i) * cell_h) << "\" width=\"" << num(cell_w) << "\" height=\""
              << num(std::max(cell_h, 0.01)) << "\" fill=\"" << fill << "\"/>\n";
        }
    }
    o << "</g>\n</svg>\n";
    return o.str();
}

std::string parallel_boxplot(const Dataset& ds, const MissingMask& mask, std::string_view column, const PlotSpec& spec) {
    const auto groups = parallel_box_groups(ds, mask, column, spec);
    double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
    for (const auto& g : groups)
        if (!g.values.empty()) {
            vmin = std::min(vmin, g.stats.min);
            vmax = std::max(vmax, g.stats.max);
        }
    if (!std::isfinite(vmin)) vmin = vmax = 0.0;
    if (vmax == vmin) vmax = vmin + 1.0;

    std::ostringstream o;
    o << header(spec, "parallelbox");
    const double margin = 50.0, label_h = 80.0;
    const double plot_h = spec.height - margin - label_h;
    const double slot = (spec.width - 2.0 * margin) / static_cast<double>(groups.size());
    auto y_of = [&](double v) { return margin + plot_h * (1.0 - (v - vmin) / (vmax - vmin)); };

    o << text(spec.width / 2.0, margin / 2.0, "Distribution of " + std::string(column));
    o << text(margin - 6.0, y_of(vmax) + 4.0, format_double(vmax), "end", 9);
    o << text(margin - 6.0, y_of(vmin) + 4.0, format_double(vmin), "end", 9);
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const auto& g = groups[i];
        const double cx = margin + (static_cast<double>(i) + 0.5) * slot;
        const double bw = slot * 0.5;
        o << text(cx, margin + plot_h + 16.0, g.label, "middle", 9);
        if (g.values.empty()) continue;
        const auto& b = g.stats;
        const std::string color = g.split_column && g.split_missing ? missing_color(spec) : std::string("#4c72b0");
        o << "<g class=\"box\" data-label=\"" << escape(g.label) << "\" data-n=\"" << b.n << "\" data-q1=\""
          << format_double(b.q1) << "\" data-median=\"" << format_double(b.median) << "\" data-q3=\"" << format_double(b.q3)
          << "\" data-whisker-low=\"" << format_double(b.whisker_low) << "\" data-whisker-high=\""
          << format_double(b.whisker_high) << "\">\n";
        o << "<line x1=\"" << num(cx) << "\" y1=\"" << num(y_of(b.whisker_low)) << "\" x2=\"" << num(cx) << "\" y2=\""
          << num(y_of(b.whisker_high)) << "\" stroke=\"#000000\"/>\n";
        o << "<rect x=\"" << num(cx - bw / 2.0) << "\" y=\"" << num(y_of(b.q3)) << "\" width=\"" << num(bw)
          << "\" height=\"" << num(std::max(0.0, y_of(b.q1) - y_of(b.q3))) << "\" fill=\"" << color
          << "\" fill-opacity=\"0.6\" stroke=\"#000000\"/>\n";
        o << "<line x1=\"" << num(cx - bw / 2.0) << "\" y1=\"" << num(y_of(b.median)) << "\" x2=\"" << num(cx + bw / 2.0)
          << "\" y2=\"" << num(y_of(b.median)) << "\" stroke=\"#000000\" stroke-width=\"2\"/>\n";
        for (double v : b.outliers)
            o << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(y_of(v)) << "\" r=\"2\" fill=\"none\" stroke=\"#000000\"/>\n";
        o << "</g>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::string render_plot(const Dataset& ds, const MissingMask& mask, const PlotSpec& spec, std::string_view column) {
    switch (spec.kind) {
    case PlotKind::Aggregation: return aggregation_plot(ds, mask, spec);
    case PlotKind::Matrix: return matrix_plot(ds, mask, spec);
    case PlotKind::ParallelBox:
        if (column.empty()) throw Error(Errc::InvalidValue, "parallel boxplot needs a column");
        return parallel_boxplot(ds, mask, column, spec);
    }
    throw Error(Errc::InvalidValue, "unknown plot kind");
}

}  // namespace mvi
