#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bevloop/agent/analyzer.hpp"
#include "bevloop/scene/raster.hpp"

namespace bevloop::agent {

struct HttpAnalyzerConfig {
    std::string base_url;  // e.g. http://127.0.0.1:8080
    std::string path = "/v1/chat/completions";
    std::string api_key;   // sent as a bearer token when non-empty
    std::string model = "analyzer-default";
    int max_retries = 3;
    double backoff_s = 0.5;  // doubles per retry
    int max_in_flight = 4;
    int timeout_s = 60;

    // BEVLOOP_ANALYZER_URL / _KEY / _MODEL / _PATH override the defaults.
    static HttpAnalyzerConfig from_env();
};

// Renders a handful of overlay frames (front view, evenly spaced in time)
// to PNG and attaches them to the context for image-capable analyzers.
void attach_overlay_frames(CaseContext& ctx, const scene::SceneRaster& overlay,
                           const scene::ViewConfig& views, int n_frames = 5);

// Chat-completions backed analyzer. Requests are retried with exponential
// backoff, the number of in-flight calls is bounded, and every exchange can
// be persisted as a transcript for audit.
class HttpAnalyzer : public Analyzer {
  public:
    explicit HttpAnalyzer(HttpAnalyzerConfig cfg);
    std::string name() const override { return "http"; }
    void set_transcript_dir(const std::string& dir);

    ClassifyResult classify(const CaseContext& ctx,
                            const std::vector<std::string>& labels) override;
    std::string describe(const CaseContext& ctx, const std::string& label) override;
    std::pair<ClassifyResult, std::string> analyze_one_step(
        const CaseContext& ctx, const std::vector<std::string>& labels) override;

  private:
    std::string chat(const std::string& kind, const CaseContext& ctx, const std::string& prompt);
    HttpAnalyzerConfig cfg_;
    std::string transcript_dir_;
};

}  // namespace bevloop::agent
