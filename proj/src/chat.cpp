#include "repair/chat.hpp"

#include <utility>

namespace repair {

ScriptedChatBackend::ScriptedChatBackend(std::string canned)
    : fn_([text = std::move(canned)](const std::string&, const std::string&) { return text; }) {}

ScriptedChatBackend::ScriptedChatBackend(Fn fn) : fn_(std::move(fn)) {}

std::string ScriptedChatBackend::complete(const std::string& system, const std::string& user) {
    return fn_(system, user);
}

}  // namespace repair
