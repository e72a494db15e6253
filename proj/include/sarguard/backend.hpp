#pragma once

#include <nlohmann/json.hpp>

#include <deque>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>

namespace sar {

/// Raised when a backend cannot produce any text (connection refused, timeout).
class BackendUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Prompt in, text out. Implementations need not be thread-safe.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string name() const = 0;
    virtual std::string complete(const std::string& prompt) = 0;
};

/// Prompts carry their structured context on a line starting with this marker.
inline constexpr const char* kContextMarker = "CONTEXT_JSON:";

/// Extracts the context object from a rendered prompt; null when absent or malformed.
nlohmann::json prompt_context(const std::string& prompt);

/// Deterministic rule-based reasoner answering stages 3-5 from the prompt
/// context: profile/item/colour matching for relevance, knowledge-entry tags for
/// interpretation confidence, and entry or location rules for the strategy.
class StubBackend final : public Backend {
public:
    std::string name() const override { return "stub"; }
    std::string complete(const std::string& prompt) override;

    static nlohmann::json relevance(const nlohmann::json& ctx);
    static nlohmann::json tactics(const nlohmann::json& ctx);
    static nlohmann::json plan(const nlohmann::json& ctx);
};

/// Replays canned responses in order, then falls back to `fallback` (or throws
/// BackendUnavailable when there is none). Used by tests.
class ScriptedBackend final : public Backend {
public:
    explicit ScriptedBackend(std::deque<std::string> responses, std::shared_ptr<Backend> fallback = nullptr);
    std::string name() const override { return "scripted"; }
    std::string complete(const std::string& prompt) override;
    std::size_t calls() const noexcept { return calls_; }
    const std::vector<std::string>& prompts() const noexcept { return prompts_; }

private:
    std::deque<std::string> responses_;
    std::shared_ptr<Backend> fallback_;
    std::size_t calls_ = 0;
    std::vector<std::string> prompts_;
};

/// Backend that always fails; exercises the escalation path.
class UnreachableBackend final : public Backend {
public:
    std::string name() const override { return "unreachable"; }
    std::string complete(const std::string&) override { throw BackendUnavailable("backend unreachable"); }
};

/// OpenAI-compatible chat-completions client over plain HTTP
/// (e.g. a local model server). Opt-in; never used by the tests.
class ChatClient final : public Backend {
public:
    struct Options {
        std::string host = "127.0.0.1";
        int port = 8000;
        std::string path = "/v1/chat/completions";
        std::string model = "local";
        std::string api_key;
        int timeout_s = 60;
    };
    explicit ChatClient(Options opts) : opts_(std::move(opts)) {}
    std::string name() const override { return "chat:" + opts_.model; }
    std::string complete(const std::string& prompt) override;

private:
    Options opts_;
};

/// "stub" (default) or "chat:host:port:model".
std::unique_ptr<Backend> make_backend(const std::string& spec);

} // namespace sar
