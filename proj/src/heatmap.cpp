#include "introspect/heatmap.hpp"

#include "introspect/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace introspect {

namespace {

std::string xml_escape(const std::string & s) {
    std::string out;
    for (unsigned char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default:
            if (c < 0x20 || c == 0x7f)
                out += "\xc2\xb7"; // middle dot for unprintable bytes
            else
                out += static_cast<char>(c);
        }
    }
    return out;
}

std::string fmt(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

// diverging blue-white-red map for v in [-1, 1]
std::string aie_color(double v) {
    v = std::max(-1.0, std::min(1.0, v));
    int r = 255, g = 255, b = 255;
    if (v >= 0.0) {
        g = b = static_cast<int>(std::lround(255.0 * (1.0 - v)));
    } else {
        r = g = static_cast<int>(std::lround(255.0 * (1.0 + v)));
    }
    char buf[16];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

const char * highlight_fill(const std::string & klass) {
    if (klass == "english-match") return "#f4a742"; // orange
    if (klass == "related") return "#c0392b";       // dark red
    if (klass == "flagged") return "#b0b0b0";       // gray
    return "#ffffff";
}

} // namespace

std::string render_lens_svg(const lens_render_data & data, const render_options & options) {
    const lens_grid & grid = data.grid;
    if (grid.n_rows() == 0 || grid.n_cols() == 0)
        throw validation_error("render: empty lens grid");

    const int label_w = 48;
    const int header_h = 30;
    const std::size_t n_rows = grid.n_rows();
    const std::size_t n_cols = grid.n_cols();
    const int width = label_w + static_cast<int>(n_cols) * options.cell_w + 8;
    const int height = header_h + static_cast<int>(n_rows) * options.cell_h + 28;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    svg << "<style>text{font-family:monospace;font-size:" << options.font_size
        << "px;}</style>\n";

    // column header: the generated token each column stands for
    for (std::size_t c = 0; c < n_cols; ++c) {
        const int x = label_w + static_cast<int>(c) * options.cell_w + 4;
        const std::string label =
            c < grid.column_tokens.size() ? grid.column_tokens[c] : std::string();
        svg << "<text x=\"" << x << "\" y=\"" << header_h - 10 << "\" font-weight=\"bold\">"
            << xml_escape(label) << "</text>\n";
    }

    auto klass_at = [&](std::size_t layer, std::size_t col) -> std::string {
        for (const auto & h : data.highlights)
            if (h.layer == layer && h.column == col) return h.klass;
        return "";
    };

    // rows top-to-bottom from the last layer down to embeddings
    for (std::size_t r = 0; r < n_rows; ++r) {
        const std::size_t layer = n_rows - 1 - r;
        const int y = header_h + static_cast<int>(r) * options.cell_h;
        svg << "<text x=\"4\" y=\"" << y + options.cell_h - 9 << "\">L" << layer
            << "</text>\n";
        for (std::size_t c = 0; c < n_cols; ++c) {
            const int x = label_w + static_cast<int>(c) * options.cell_w;
            const std::string klass = klass_at(layer, c);
            const bool masked = options.mask_flagged && klass == "flagged";
            svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << options.cell_w - 2
                << "\" height=\"" << options.cell_h - 2 << "\" fill=\""
                << (klass.empty() ? "#ffffff" : highlight_fill(klass))
                << "\" stroke=\"#888888\"";
            if (!klass.empty()) svg << " class=\"" << klass << "\"";
            svg << "/>\n";
            const auto & cell = grid.cells[layer][c];
            if (!cell.top.empty() && !masked) {
                svg << "<text x=\"" << x + 3 << "\" y=\"" << y + options.cell_h - 9 << "\">"
                    << xml_escape(cell.top[0].token) << " "
                    << fmt(cell.top[0].probability, 3) << "</text>\n";
            }
        }
    }

    svg << "<text x=\"4\" y=\"" << height - 8 << "\">prompt: " << xml_escape(data.prompt)
        << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

std::string render_trace_svg(const trace_grid_result & grid, const render_options & options) {
    if (grid.aie.rows == 0 || grid.aie.cols == 0)
        throw validation_error("render: empty trace grid");

    const int label_w = 48;
    const int header_h = 30;
    const std::size_t n_rows = grid.aie.rows;
    const std::size_t n_cols = grid.aie.cols;
    const int width = label_w + static_cast<int>(n_cols) * options.cell_w + 8;
    const int height = header_h + static_cast<int>(n_rows) * options.cell_h + 46;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    svg << "<style>text{font-family:monospace;font-size:" << options.font_size
        << "px;}</style>\n";

    for (std::size_t c = 0; c < n_cols; ++c) {
        const int x = label_w + static_cast<int>(c) * options.cell_w + 4;
        std::string label = c < grid.prompt_tokens.size() ? grid.prompt_tokens[c] : "";
        if (c >= grid.probe.subject_begin && c < grid.probe.subject_end) label += "*";
        svg << "<text x=\"" << x << "\" y=\"" << header_h - 10 << "\" font-weight=\"bold\">"
            << xml_escape(label) << "</text>\n";
    }

    for (std::size_t r = 0; r < n_rows; ++r) {
        const std::size_t layer = n_rows - 1 - r;
        const int y = header_h + static_cast<int>(r) * options.cell_h;
        svg << "<text x=\"4\" y=\"" << y + options.cell_h - 9 << "\">L" << layer
            << "</text>\n";
        for (std::size_t c = 0; c < n_cols; ++c) {
            const int x = label_w + static_cast<int>(c) * options.cell_w;
            const double v = grid.aie.at(layer, c);
            svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << options.cell_w - 2
                << "\" height=\"" << options.cell_h - 2 << "\" fill=\"" << aie_color(v)
                << "\" stroke=\"#888888\"/>\n";
            svg << "<text x=\"" << x + 3 << "\" y=\"" << y + options.cell_h - 9 << "\">"
                << fmt(v, 3) << "</text>\n";
        }
    }

    svg << "<text x=\"4\" y=\"" << height - 26 << "\">p_clean=" << fmt(grid.p_clean, 6)
        << " p_corrupted_mean=" << fmt(grid.p_corrupted_mean, 6)
        << " sigma=" << fmt(grid.sigma, 6) << " seeds=" << grid.n_seeds << "</text>\n";
    svg << "<text x=\"4\" y=\"" << height - 8 << "\">prompt: " << xml_escape(grid.probe.prompt)
        << " (* marks subject tokens)</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

void write_svg(const std::string & svg, const std::string & path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + path);
    out << svg;
    if (!out) throw io_error("short write to " + path);
}

} // namespace introspect
