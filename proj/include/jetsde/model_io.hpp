#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "jetsde/manifold.hpp"
#include "jetsde/model.hpp"

namespace jetsde {

/// Manifold block of a model file: either an implicit surface over named
/// ambient coordinates or an explicit metric over the chart states; the
/// optional embedding maps chart points to ambient space for diagnostics.
struct ManifoldSpec {
    std::optional<ImplicitSurface> surface;
    std::vector<std::string> ambient_names;
    std::optional<ExplicitMetric> metric;
    std::vector<ExprAst> embedding;
    Vec x0;               // ambient start (surface) or chart start (metric)
    std::size_t chart_dim = 0;
};

struct ModelFile {
    std::string name;
    std::optional<SdeModel> model;
    std::optional<ManifoldSpec> manifold;
};

/// Load and schema-check a model JSON document. Throws SchemaError on
/// structural problems; expression errors keep their parse positions.
ModelFile load_model_file(const std::string& path);
ModelFile parse_model_json(const std::string& text, const std::string& origin = "<string>");

}  // namespace jetsde
