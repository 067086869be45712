#pragma once

#include <string>

#include "fcauth/biofuzz.hpp"
#include "fcauth/primitives.hpp"

namespace fcauth {

// What a card holder presents at the terminal.
struct Credentials {
  Identity id;
  std::string password;
  bio::BiometricSample biometric;
};

}  // namespace fcauth
