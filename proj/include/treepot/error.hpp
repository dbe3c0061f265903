#pragma once

#include <map>
#include <stdexcept>
#include <string>

namespace treepot {

// Every failure carries a stable code, the module that raised it and free-form context.
class Error : public std::runtime_error {
 public:
  Error(std::string code, std::string module, const std::string& message,
        std::map<std::string, std::string> context = {})
      : std::runtime_error(message),
        code_(std::move(code)),
        module_(std::move(module)),
        context_(std::move(context)) {}

  const std::string& code() const { return code_; }
  const std::string& module() const { return module_; }
  const std::map<std::string, std::string>& context() const { return context_; }

 private:
  std::string code_;
  std::string module_;
  std::map<std::string, std::string> context_;
};

}  // namespace treepot
