#pragma once

#include "introspect/interpolation.hpp"
#include "introspect/lens.hpp"
#include "introspect/routing.hpp"
#include "introspect/steering.hpp"
#include "introspect/tracing.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace introspect {

// Schema-versioned analysis artifact. metadata must carry bundle_hash plus
// whatever parameters reproduce the run; payload is kind-specific.
struct report {
    std::string kind;
    int version = 1;
    nlohmann::json metadata;
    nlohmann::json payload;

    bool operator==(const report &) const = default;
};

const std::vector<std::string> & report_kinds();

std::string report_to_string(const report & r);
void write_report(const report & r, const std::string & path);
report read_report(const std::string & path);

// Cell highlight classes used by lens reports and the renderer:
// "english-match", "related", "flagged".
struct cell_highlight {
    std::size_t layer = 0;
    std::size_t column = 0;
    std::string klass;
};

// ---- payload builders (probabilities rounded to 6 decimals) ----

nlohmann::json lens_payload(const lens_grid & grid, const std::string & prompt,
                            const std::string & generated,
                            const std::vector<cell_highlight> & highlights = {});
nlohmann::json trace_payload(const trace_grid_result & grid);
nlohmann::json steering_vector_payload(const steering_vector & v);
nlohmann::json sweep_payload(const sweep_result & s);
nlohmann::json routing_payload(const routing_report & rep, const flagged_report * flagged);
nlohmann::json interpolation_payload(const std::vector<interpolation_point> & points,
                                     const interpolation_spec & spec);
nlohmann::json geometry_payload(const std::vector<std::optional<double>> & cosines,
                                const std::vector<std::optional<double>> * nudged,
                                double beta);

// ---- payload readers for rendering ----

struct lens_render_data {
    lens_grid grid;
    std::string prompt;
    std::string generated;
    std::vector<cell_highlight> highlights;
};

lens_render_data lens_from_payload(const nlohmann::json & payload);
trace_grid_result trace_from_payload(const nlohmann::json & payload);

} // namespace introspect
