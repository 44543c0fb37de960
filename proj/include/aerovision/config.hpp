#pragma once

#include <filesystem>
#include <string_view>

#include <json.hpp>

#include "aerovision/backend.hpp"
#include "aerovision/pipeline.hpp"

namespace aerovision {

/// Parses one raw backend output for `task`. Accepted shapes:
///   detection:    {"grid_w","grid_h","num_classes","anchors":[[w,h]...],"values":[...]}
///                 or {"num_classes":C,"detection":{"box":[x0,y0,x1,y1],"class_id":k}}
///   segmentation: {"width","height","num_classes","scores":[...]}
///                 or {"width","height","num_classes","fill_class":k}
///   action:       [s0..s5] or {"scores":[s0..s5]}
/// Throws SchemaViolation with a JSON pointer under `pointer`.
RawOutput parse_raw_output(const nlohmann::json& value, Task task, const std::string& pointer = "");
nlohmann::json raw_output_to_json(const RawOutput& output);

/// Parses the pipeline config document; relative paths resolve against base_dir.
/// Throws SchemaViolation naming the offending field.
PipelineConfig parse_pipeline_config(std::string_view document, const std::filesystem::path& base_dir = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

}  // namespace aerovision
