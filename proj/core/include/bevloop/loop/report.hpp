#pragma once

#include <string>

namespace bevloop::loop {

// Renders a run's manifest into a plain-text table plus an SVG chart of the
// held-out collision rate and the mined failure counts. Both artifacts are
// byte-deterministic for a fixed manifest.
std::string render_report_text(const std::string& run_dir);
std::string render_report_svg(const std::string& run_dir);

// Writes report.txt and report.svg into the run directory and returns the
// text.
std::string write_report(const std::string& run_dir);

}  // namespace bevloop::loop
