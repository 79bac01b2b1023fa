#pragma once

#include <string>
#include <vector>

#include "suft/data.hpp"
#include "suft/network.hpp"
#include "suft/train.hpp"

namespace suft {

/// Everything a run needs, merged from a sectioned key=value file plus
/// repeatable `section.key=value` overrides. Unknown keys are errors.
struct RunConfig {
    NetworkConfig network;
    TrainConfig train;
    DegradationSpec degradation;
    struct Paths {
        std::string manifest;
        std::string test_manifest;
        std::string checkpoint;
        std::string out_dir = "out";
        std::string resume;
    } paths;
    /// Set when [train] d_max appears explicitly; otherwise the manifest wins.
    bool d_max_set = false;

    void validate() const;

    static RunConfig from_file(const std::string& path,
                               const std::vector<std::string>& overrides = {});
    static RunConfig from_text(const std::string& text, const std::string& source_name,
                               const std::vector<std::string>& overrides = {});
};

}  // namespace suft
