#pragma once

#include "introspect/report.hpp"

#include <string>

namespace introspect {

struct render_options {
    int cell_w = 92;
    int cell_h = 26;
    int font_size = 11;
    bool mask_flagged = false; // draw flagged cells as gray boxes without text
};

// Deterministic SVG with embedded text; same input, same bytes.
std::string render_lens_svg(const lens_render_data & data, const render_options & options);
std::string render_trace_svg(const trace_grid_result & grid, const render_options & options);

void write_svg(const std::string & svg, const std::string & path);

} // namespace introspect
