#include "bevloop/agent/http_analyzer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "bevloop/common/error.hpp"
#include "bevloop/common/png.hpp"
#include "bevloop/planner/overlay.hpp"
#include "httplib.h"
#include "json.hpp"

namespace bevloop::agent {

using nlohmann::json;

HttpAnalyzerConfig HttpAnalyzerConfig::from_env() {
    HttpAnalyzerConfig c;
    if (const char* v = std::getenv("BEVLOOP_ANALYZER_URL")) c.base_url = v;
    if (const char* v = std::getenv("BEVLOOP_ANALYZER_KEY")) c.api_key = v;
    if (const char* v = std::getenv("BEVLOOP_ANALYZER_MODEL")) c.model = v;
    if (const char* v = std::getenv("BEVLOOP_ANALYZER_PATH")) c.path = v;
    return c;
}

void attach_overlay_frames(CaseContext& ctx, const scene::SceneRaster& overlay,
                           const scene::ViewConfig& views, int n_frames) {
    if (overlay.n_frames <= 0 || overlay.channels < 3) return;
    n_frames = std::min(n_frames, overlay.n_frames);
    const int h = overlay.h;
    const int w = overlay.w;
    const bool has_overlay_channels = overlay.channels > planner::kOverlayDetections;
    (void)views;

    auto byte_of = [](float v) {
        return static_cast<unsigned char>(std::clamp(v, 0.0f, 1.0f) * 255.0f + 0.5f);
    };
    for (int fi = 0; fi < n_frames; ++fi) {
        // Even spacing that always includes the first and last frame.
        const int t = n_frames == 1
                          ? 0
                          : fi * (overlay.n_frames - 1) / (n_frames - 1);
        std::vector<unsigned char> px(static_cast<size_t>(h) * w * 3);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const float fore = overlay.at(0, t, 0, y, x);
                const float road = overlay.at(0, t, 1, y, x);
                const float amb = overlay.at(0, t, 2, y, x);
                float plan = 0.0f, pred = 0.0f, det = 0.0f;
                if (has_overlay_channels) {
                    plan = overlay.at(0, t, planner::kOverlayPlan, y, x);
                    pred = overlay.at(0, t, planner::kOverlayPredictions, y, x);
                    det = overlay.at(0, t, planner::kOverlayDetections, y, x);
                }
                const size_t i = (static_cast<size_t>(y) * w + x) * 3;
                px[i + 0] = byte_of(std::max({fore, det, amb * 0.25f}));
                px[i + 1] = byte_of(std::max({plan, road * 0.6f, amb * 0.25f}));
                px[i + 2] = byte_of(std::max({pred, road * 0.3f, amb * 0.25f}));
            }
        }
        const std::vector<uint8_t> bytes = encode_png(px.data(), w, h, 3);
        ctx.attachments.emplace_back(bytes.begin(), bytes.end());
    }
}

namespace {

// Bounded in-flight gate shared by all analyzer instances in the process.
class Gate {
  public:
    explicit Gate(int slots) : slots_(slots) {}
    void acquire() {
        std::unique_lock lk(m_);
        cv_.wait(lk, [this] { return slots_ > 0; });
        --slots_;
    }
    void release() {
        {
            std::lock_guard lk(m_);
            ++slots_;
        }
        cv_.notify_one();
    }

  private:
    std::mutex m_;
    std::condition_variable cv_;
    int slots_;
};

Gate& gate(int slots) {
    static Gate g(slots);
    return g;
}

std::string context_block(const CaseContext& ctx) {
    std::string kws;
    for (const auto& k : ctx.scene_keywords) {
        if (!kws.empty()) kws += ", ";
        kws += k;
    }
    return std::string("scene: ") + ctx.scene_id + "\nweather: " +
           scene::to_string(ctx.tags.weather) + "\ntime_of_day: " +
           scene::to_string(ctx.tags.time_of_day) + "\ndensity: " +
           scene::to_string(ctx.tags.density) + "\ncollider_class: " +
           scene::to_string(ctx.collider_cls) +
           "\ncollider_detected: " + (ctx.collider_detected ? "true" : "false") +
           "\nscene_keywords: " + kws;
}

// First balanced JSON object inside a model reply (tolerates prose and
// markdown fences around it).
json extract_json(const std::string& text) {
    const size_t start = text.find('{');
    if (start == std::string::npos) throw ParseError("no JSON object in analyzer reply", 1);
    int depth = 0;
    for (size_t i = start; i < text.size(); ++i) {
        if (text[i] == '{') ++depth;
        if (text[i] == '}') {
            --depth;
            if (depth == 0) return json::parse(text.substr(start, i - start + 1));
        }
    }
    throw ParseError("unbalanced JSON object in analyzer reply", 1);
}

}  // namespace

HttpAnalyzer::HttpAnalyzer(HttpAnalyzerConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty())
        throw InvalidArgument("http analyzer needs a base url (BEVLOOP_ANALYZER_URL)");
}

void HttpAnalyzer::set_transcript_dir(const std::string& dir) {
    transcript_dir_ = dir;
    if (!dir.empty()) std::filesystem::create_directories(dir);
}

std::string HttpAnalyzer::chat(const std::string& kind, const CaseContext& ctx,
                               const std::string& prompt) {
    json content = json::array();
    content.push_back({{"type", "text"}, {"text", prompt}});
    for (const auto& png : ctx.attachments) {
        const std::vector<uint8_t> bytes(png.begin(), png.end());
        content.push_back(
            json{{"type", "image_url"},
                 {"image_url", json{{"url", "data:image/png;base64," + base64_encode(bytes)}}}});
    }
    json body = {{"model", cfg_.model},
                 {"temperature", 0},
                 {"messages", json::array({json{{"role", "user"}, {"content", content}}})}};
    const std::string payload = body.dump();

    std::string reply;
    std::string last_error;
    Gate& g = gate(cfg_.max_in_flight);
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0) {
            const double delay = cfg_.backoff_s * std::pow(2.0, attempt - 1);
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        g.acquire();
        httplib::Client client(cfg_.base_url);
        client.set_read_timeout(cfg_.timeout_s, 0);
        client.set_connection_timeout(cfg_.timeout_s, 0);
        httplib::Headers headers;
        if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
        auto res = client.Post(cfg_.path, headers, payload, "application/json");
        g.release();

        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "http status " + std::to_string(res->status);
            // Client errors will not improve on retry.
            if (res->status >= 400 && res->status < 500 && res->status != 429) break;
            continue;
        }
        reply = res->body;
        break;
    }
    if (reply.empty()) throw IoError("analyzer request failed after retries: " + last_error);

    json parsed;
    try {
        parsed = json::parse(reply);
    } catch (const std::exception& e) {
        throw ParseError(std::string("bad analyzer response body: ") + e.what(), 1);
    }
    std::string text;
    try {
        text = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("analyzer response missing content: ") + e.what(), 1);
    }

    if (!transcript_dir_.empty()) {
        static std::mutex transcript_mutex;
        std::lock_guard lk(transcript_mutex);
        static int counter = 0;
        char name[64];
        std::snprintf(name, sizeof(name), "%04d_%s.json", counter++, kind.c_str());
        // Keep the request without the image payloads; they are large and
        // reproducible from the run directory.
        json slim_body = body;
        for (auto& m : slim_body["messages"]) {
            for (auto& c : m["content"]) {
                if (c.value("type", "") == "image_url")
                    c["image_url"]["url"] = "<png omitted>";
            }
        }
        json transcript = {{"scene_id", ctx.scene_id},
                           {"kind", kind},
                           {"request", slim_body},
                           {"response_text", text}};
        std::ofstream out(std::filesystem::path(transcript_dir_) / name);
        out << transcript.dump(2) << "\n";
    }
    return text;
}

ClassifyResult HttpAnalyzer::classify(const CaseContext& ctx,
                                      const std::vector<std::string>& labels) {
    std::string cand;
    for (const auto& l : labels) {
        if (!cand.empty()) cand += ", ";
        cand += l;
    }
    const std::string prompt =
        "You are auditing an autonomous driving planner failure. The frames show a "
        "top-down scene with the planned path and detected objects.\n" +
        context_block(ctx) + "\nCandidate failure categories: [" + cand +
        "]. Reply with strict JSON only: {\"confidences\": {\"<category>\": <0..1>, ...}} "
        "covering every candidate.";
    const json j = extract_json(chat("classify", ctx, prompt));
    ClassifyResult r;
    for (const auto& l : labels) r.confidence[l] = 0.0;
    if (j.contains("confidences")) {
        for (const auto& [k, v] : j.at("confidences").items()) {
            if (r.confidence.count(k) && v.is_number()) r.confidence[k] = v.get<double>();
        }
    }
    return r;
}

std::string HttpAnalyzer::describe(const CaseContext& ctx, const std::string& label) {
    const std::string prompt =
        "You are auditing an autonomous driving planner failure.\n" + context_block(ctx) +
        "\nThe failure belongs to the category \"" + label +
        "\". Describe the concrete cause in one sentence, using scenario keywords such "
        "as the ones listed above where they apply.";
    return chat("describe", ctx, prompt);
}

std::pair<ClassifyResult, std::string> HttpAnalyzer::analyze_one_step(
    const CaseContext& ctx, const std::vector<std::string>& labels) {
    std::string cand;
    for (const auto& l : labels) {
        if (!cand.empty()) cand += ", ";
        cand += l;
    }
    const std::string prompt =
        "You are auditing an autonomous driving planner failure.\n" + context_block(ctx) +
        "\nCandidate failure categories: [" + cand +
        "]. In one reply, classify and describe the failure. Reply with strict JSON "
        "only: {\"confidences\": {\"<category>\": <0..1>, ...}, \"description\": \"...\"}.";
    const std::string text = chat("one_step", ctx, prompt);
    const json j = extract_json(text);
    ClassifyResult r;
    for (const auto& l : labels) r.confidence[l] = 0.0;
    if (j.contains("confidences")) {
        for (const auto& [k, v] : j.at("confidences").items()) {
            if (r.confidence.count(k) && v.is_number()) r.confidence[k] = v.get<double>();
        }
    }
    return {r, j.value("description", "")};
}

}  // namespace bevloop::agent
