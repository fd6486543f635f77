#pragma once

namespace fixtures {

// The f1 routine used across the unit suites: one conditional guard around
// a strcpy call, frame set up and torn down around it.
inline const char* kF1Listing = R"(listing m1 version 1
routine f1 @0x1000
  0x1000: push ebp
  0x1001: mov ebp, esp
  0x1003: cmp [ebp+8], 0
  0x1007: jz 0x100e
  0x1009: call strcpy
  0x100e: mov esp, ebp
  0x1010: pop ebp
  0x1011: ret
)";

// Same routine in the machine-oriented form.
inline const char* kF1Json = R"({
  "format_version": 1,
  "module_name": "m1",
  "image_base": 0,
  "routines": [
    {
      "name": "f1",
      "entry": 4096,
      "instructions": [
        {"address": 4096, "mnemonic": "push", "operands": ["ebp"]},
        {"address": 4097, "mnemonic": "mov", "operands": ["ebp", "esp"]},
        {"address": 4099, "mnemonic": "cmp", "operands": ["[ebp+8]", "0"]},
        {"address": 4103, "mnemonic": "jz", "operands": ["0x100e"]},
        {"address": 4105, "mnemonic": "call", "operands": ["strcpy"]},
        {"address": 4110, "mnemonic": "mov", "operands": ["esp", "ebp"]},
        {"address": 4112, "mnemonic": "pop", "operands": ["ebp"]},
        {"address": 4113, "mnemonic": "ret", "operands": []}
      ]
    }
  ]
})";

// Nested predicate fixture: q's block is dominated by p's block.
inline const char* kNestedIfListing = R"(listing m2 version 1
routine nested @0x0
  0x0: cmp eax, 0
  0x1: jz 0x6
  0x2: cmp ebx, 0
  0x3: jz 0x5
  0x4: inc ecx
  0x5: inc edx
  0x6: ret
)";

// Diamond: entry branches to a/b, both rejoin at exit.
inline const char* kDiamondListing = R"(listing m3 version 1
routine diamond @0x0
  0x0: cmp eax, 0
  0x1: jz 0x4
  0x2: mov ebx, 1
  0x3: jmp 0x5
  0x4: mov ebx, 2
  0x5: ret
)";

// Frozen f1 golden values, derived by hand token counts plus arithmetic
// (see tests using them for the counts).
inline constexpr double kF1HNStar = 35.161259458730164;
inline constexpr double kF1HV = 66.60791492653966;
inline constexpr double kF1HD = 5.833333333333334;
inline constexpr double kF1HE = 388.54617040481475;
inline constexpr double kF1HB = 0.017748997728433663;
inline constexpr double kF1Exp = 0.035497995456867326;
inline constexpr double kF1Cocol = 10.017748997728434;
inline constexpr double kF1Abc = 4.242640687119285;

} // namespace fixtures
