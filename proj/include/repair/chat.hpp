#pragma once

#include <functional>
#include <string>

namespace repair {

/// One system+user exchange, one text reply. Implemented by the remote HTTP
/// client and by scripted test backends.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string complete(const std::string& system, const std::string& user) = 0;
};

class ScriptedChatBackend : public ChatBackend {
public:
    using Fn = std::function<std::string(const std::string& system, const std::string& user)>;

    explicit ScriptedChatBackend(std::string canned);
    explicit ScriptedChatBackend(Fn fn);

    std::string complete(const std::string& system, const std::string& user) override;

private:
    Fn fn_;
};

}  // namespace repair
