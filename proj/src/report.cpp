#include "introspect/report.hpp"

#include "introspect/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace introspect {

using nlohmann::json;

const std::vector<std::string> & report_kinds() {
    static const std::vector<std::string> kinds = {
        "lens",    "trace",         "steer",    "sweep",
        "routing", "interpolation", "geometry", "generation",
    };
    return kinds;
}

namespace {

void validate(const report & r, const std::string & where) {
    if (std::find(report_kinds().begin(), report_kinds().end(), r.kind) ==
        report_kinds().end())
        throw validation_error(where + ": unknown report kind '" + r.kind + "'");
    if (r.version != 1)
        throw validation_error(where + ": unsupported report version " +
                               std::to_string(r.version));
    if (!r.metadata.is_object() || !r.metadata.contains("bundle_hash") ||
        !r.metadata["bundle_hash"].is_string())
        throw validation_error(where + ": metadata is missing bundle_hash");
    if (r.payload.is_null())
        throw validation_error(where + ": missing payload");
}

double round6(double x) { return std::round(x * 1e6) / 1e6; }

} // namespace

std::string report_to_string(const report & r) {
    validate(r, "report");
    const json j = {
        {"kind", r.kind}, {"version", r.version}, {"metadata", r.metadata},
        {"payload", r.payload},
    };
    return j.dump(2) + "\n";
}

void write_report(const report & r, const std::string & path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + path);
    out << report_to_string(r);
    if (!out) throw io_error("short write to " + path);
}

report read_report(const std::string & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception & e) {
        throw validation_error(path + ": " + e.what());
    }
    report r;
    r.kind = j.value("kind", "");
    r.version = j.value("version", 0);
    r.metadata = j.value("metadata", json());
    r.payload = j.value("payload", json());
    validate(r, path);
    return r;
}

// ---- payload builders ----

json lens_payload(const lens_grid & grid, const std::string & prompt,
                  const std::string & generated,
                  const std::vector<cell_highlight> & highlights) {
    json rows = json::array();
    for (const auto & row : grid.cells) {
        json cols = json::array();
        for (const auto & cell : row) {
            json entries = json::array();
            for (const auto & e : cell.top)
                entries.push_back({{"token", e.token},
                                   {"id", e.token_id},
                                   {"p", round6(e.probability)}});
            cols.push_back(entries);
        }
        rows.push_back(cols);
    }
    json hl = json::array();
    for (const auto & h : highlights)
        hl.push_back({{"layer", h.layer}, {"column", h.column}, {"class", h.klass}});
    return {{"prompt", prompt},
            {"generated", generated},
            {"k", grid.k},
            {"prompt_len", grid.prompt_len},
            {"column_tokens", grid.column_tokens},
            {"rows", rows},
            {"highlights", hl}};
}

json trace_payload(const trace_grid_result & grid) {
    json rows = json::array();
    for (std::size_t l = 0; l < grid.aie.rows; ++l) {
        json cols = json::array();
        for (std::size_t t = 0; t < grid.aie.cols; ++t) cols.push_back(grid.aie.at(l, t));
        rows.push_back(cols);
    }
    return {{"aie", rows},
            {"p_clean", grid.p_clean},
            {"p_corrupted_mean", grid.p_corrupted_mean},
            {"n_seeds", grid.n_seeds},
            {"sigma", grid.sigma},
            {"prompt", grid.probe.prompt},
            {"prompt_tokens", grid.prompt_tokens},
            {"subject_span", {grid.probe.subject_begin, grid.probe.subject_end}},
            {"answer_token", grid.probe.answer_token}};
}

json steering_vector_payload(const steering_vector & v) {
    json rows = json::array();
    for (std::size_t l = 0; l < v.per_layer.rows; ++l) {
        json row = json::array();
        for (std::size_t i = 0; i < v.per_layer.cols; ++i) row.push_back(v.per_layer.at(l, i));
        rows.push_back(row);
    }
    return {{"concept", v.concept_label},
            {"language", v.language},
            {"n_positive", v.n_positive},
            {"n_negative", v.n_negative},
            {"extraction_rule",
             v.rule == extraction_rule::final_position ? "final-position"
                                                       : "mean-over-positions"},
            {"per_layer", rows}};
}

json sweep_payload(const sweep_result & s) {
    json cells = json::array();
    for (const auto & c : s.table)
        cells.push_back({{"layer", c.layer},
                         {"gamma", c.gamma},
                         {"successes", c.successes},
                         {"n_prompts", c.n_prompts},
                         {"rate", c.rate}});
    return {{"table", cells},
            {"best", {{"layer", s.best().layer}, {"gamma", s.best().gamma},
                      {"rate", s.best().rate}}}};
}

json routing_payload(const routing_report & rep, const flagged_report * flagged) {
    auto bucket = [](const routing_bucket & b) {
        return json{{"n_words", b.n_words},
                    {"n_routed", b.n_routed},
                    {"n_homograph", b.n_homograph},
                    {"proportion", b.proportion},
                    {"std_error", b.std_error}};
    };
    json per_pos = json::object();
    for (const auto & [pos, b] : rep.per_pos) per_pos[pos] = bucket(b);
    json out = {{"per_pos", per_pos}, {"overall", bucket(rep.overall)}};
    if (flagged != nullptr)
        out["flagged"] = {{"matched_cells", flagged->matched_cells},
                          {"total_cells", flagged->total_cells},
                          {"percentage", flagged->percentage}};
    return out;
}

json interpolation_payload(const std::vector<interpolation_point> & points,
                           const interpolation_spec & spec) {
    json pts = json::array();
    for (const auto & p : points)
        pts.push_back({{"alpha", p.alpha},
                       {"output", p.output_text},
                       {"correct", p.correct},
                       {"language", p.answer_language}});
    json propensity = json::object();
    for (const auto & [label, frac] : language_propensity(points)) propensity[label] = frac;
    return {{"prompt_a", spec.prompt_a},
            {"prompt_b", spec.prompt_b},
            {"layer", spec.layer},
            {"host", spec.host == interpolation_spec::host_t::A ? "A" : "B"},
            {"instruction_prefix", spec.instruction_prefix},
            {"points", pts},
            {"propensity", propensity}};
}

json geometry_payload(const std::vector<std::optional<double>> & cosines,
                      const std::vector<std::optional<double>> * nudged, double beta) {
    auto to_json = [](const std::vector<std::optional<double>> & v) {
        json arr = json::array();
        for (const auto & x : v) {
            if (x)
                arr.push_back(*x);
            else
                arr.push_back(nullptr); // undefined (zero-norm layer), not 0
        }
        return arr;
    };
    json out = {{"cosine", to_json(cosines)}};
    if (nudged != nullptr) {
        out["nudged"] = to_json(*nudged);
        out["beta"] = beta;
    }
    return out;
}

// ---- payload readers ----

lens_render_data lens_from_payload(const json & payload) {
    lens_render_data data;
    data.prompt = payload.value("prompt", "");
    data.generated = payload.value("generated", "");
    data.grid.k = payload.value("k", std::size_t{0});
    data.grid.prompt_len = payload.value("prompt_len", std::size_t{0});
    if (payload.contains("column_tokens"))
        data.grid.column_tokens =
            payload["column_tokens"].get<std::vector<std::string>>();
    if (!payload.contains("rows") || !payload["rows"].is_array())
        throw validation_error("lens payload: missing rows");
    std::size_t l = 0;
    for (const auto & rj : payload["rows"]) {
        std::vector<lens_cell> row;
        std::size_t c = 0;
        for (const auto & cj : rj) {
            lens_cell cell;
            cell.layer = l;
            cell.column = c;
            for (const auto & ej : cj)
                cell.top.push_back({ej.value("id", 0u), ej.value("token", ""),
                                    ej.value("p", 0.0)});
            row.push_back(std::move(cell));
            ++c;
        }
        data.grid.cells.push_back(std::move(row));
        ++l;
    }
    if (payload.contains("highlights"))
        for (const auto & hj : payload["highlights"])
            data.highlights.push_back({hj.value("layer", std::size_t{0}),
                                       hj.value("column", std::size_t{0}),
                                       hj.value("class", "")});
    return data;
}

trace_grid_result trace_from_payload(const json & payload) {
    trace_grid_result grid;
    if (!payload.contains("aie") || !payload["aie"].is_array())
        throw validation_error("trace payload: missing aie matrix");
    const auto & rows = payload["aie"];
    const std::size_t n_rows = rows.size();
    const std::size_t n_cols = n_rows > 0 ? rows[0].size() : 0;
    grid.aie = mat(n_rows, n_cols);
    for (std::size_t l = 0; l < n_rows; ++l) {
        if (rows[l].size() != n_cols)
            throw validation_error("trace payload: ragged aie matrix");
        for (std::size_t t = 0; t < n_cols; ++t) grid.aie.at(l, t) = rows[l][t].get<double>();
    }
    grid.p_clean = payload.value("p_clean", 0.0);
    grid.p_corrupted_mean = payload.value("p_corrupted_mean", 0.0);
    grid.n_seeds = payload.value("n_seeds", std::size_t{0});
    grid.sigma = payload.value("sigma", 0.0);
    grid.probe.prompt = payload.value("prompt", "");
    if (payload.contains("prompt_tokens"))
        grid.prompt_tokens = payload["prompt_tokens"].get<std::vector<std::string>>();
    if (payload.contains("subject_span") && payload["subject_span"].size() == 2) {
        grid.probe.subject_begin = payload["subject_span"][0].get<std::size_t>();
        grid.probe.subject_end = payload["subject_span"][1].get<std::size_t>();
    }
    return grid;
}

} // namespace introspect
