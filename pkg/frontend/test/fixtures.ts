/**
 * Canned wire frames captured from a live serve session (giant_to_dwarf
 * scenario, dwarf avatar).  Raw strings feed the parser tests; the typed
 * constants feed everything downstream.
 */

import { parseFrame, type HelloFrame, type StateFrame } from "../src/protocol.js";

export const helloRaw = "{\"type\":\"hello\",\"protocol\":1,\"scenario\":\"giant_to_dwarf\",\"steering\":true,\"timestep\":0.005,\"tasks\":[\"left_hand\",\"right_hand\"],\"guides\":[],\"segments\":[{\"name\":\"pelvis\",\"parent\":null},{\"name\":\"torso\",\"parent\":\"pelvis\"},{\"name\":\"head\",\"parent\":\"torso\"},{\"name\":\"l_thigh\",\"parent\":\"pelvis\"},{\"name\":\"l_shin\",\"parent\":\"l_thigh\"},{\"name\":\"l_foot\",\"parent\":\"l_shin\"},{\"name\":\"r_thigh\",\"parent\":\"pelvis\"},{\"name\":\"r_shin\",\"parent\":\"r_thigh\"},{\"name\":\"r_foot\",\"parent\":\"r_shin\"},{\"name\":\"l_upper_arm\",\"parent\":\"torso\"},{\"name\":\"l_forearm\",\"parent\":\"l_upper_arm\"},{\"name\":\"r_upper_arm\",\"parent\":\"torso\"},{\"name\":\"r_forearm\",\"parent\":\"r_upper_arm\"}],\"planes\":[{\"name\":\"floor\",\"point\":[0.0,0.0,0.0],\"normal\":[0.0,0.0,1.0]}],\"ellipse\":{\"center\":[0.02475,0.0,0.0],\"axes\":[0.09432,0.056925],\"angle\":1.570796,\"d\":0.09432}}";

export const stateBalancedRaw = "{\"type\":\"state\",\"t\":1.71,\"joints\":[{\"name\":\"pelvis\",\"pos\":[0.02367,-0.0,0.54731],\"quat\":[0.997195,-0.0,0.074848,0.0]},{\"name\":\"torso\",\"pos\":[0.04158,-0.0,0.66597],\"quat\":[0.991265,-0.0,0.131886,0.0]},{\"name\":\"head\",\"pos\":[0.14617,-0.0,1.05205],\"quat\":[0.987454,-0.0,0.157906,0.0]},{\"name\":\"l_thigh\",\"pos\":[0.02068,0.08,0.52753],\"quat\":[0.999652,0.0,0.026368,-0.0]},{\"name\":\"l_shin\",\"pos\":[0.00792,0.08,0.28587],\"quat\":[0.999866,0.0,0.01637,-0.0]},{\"name\":\"l_foot\",\"pos\":[0.0,0.08,0.044],\"quat\":[1.0,0.0,0.0,-0.0]},{\"name\":\"r_thigh\",\"pos\":[0.02068,-0.08,0.52753],\"quat\":[0.999652,-0.0,0.026368,0.0]},{\"name\":\"r_shin\",\"pos\":[0.00792,-0.08,0.28587],\"quat\":[0.999866,-0.0,0.01637,0.0]},{\"name\":\"r_foot\",\"pos\":[0.0,-0.08,0.044],\"quat\":[1.0,-0.0,0.0,0.0]},{\"name\":\"l_upper_arm\",\"pos\":[0.12943,0.176,0.99028],\"quat\":[0.990713,0.003726,-0.135894,-0.002535]},{\"name\":\"l_forearm\",\"pos\":[0.19406,0.17761,0.75915],\"quat\":[0.992022,0.003751,-0.125981,-0.002498]},{\"name\":\"r_upper_arm\",\"pos\":[0.12943,-0.176,0.99028],\"quat\":[0.990713,-0.003726,-0.135894,0.002535]},{\"name\":\"r_forearm\",\"pos\":[0.19406,-0.17761,0.75915],\"quat\":[0.992022,-0.003751,-0.125981,0.002498]}],\"com\":[0.08139,-0.0,0.702687],\"delta\":8.8966e-05,\"delta_norm\":0.01,\"balance\":true,\"ellipse\":{\"center\":[0.02475,0.0,0.0],\"axes\":[0.09432,0.056925],\"angle\":1.570796,\"d\":0.09432},\"contacts\":[[-0.0385,0.0552,0.0],[-0.0385,0.1048,0.0],[0.088,0.0552,0.0],[0.088,0.1048,0.0],[-0.0385,-0.1048,0.0],[-0.0385,-0.0552,0.0],[0.088,-0.1048,0.0],[0.088,-0.0552,0.0]],\"targets\":{\"left_hand\":{\"pos\":[0.55,0.15,0.8],\"enabled\":true},\"right_hand\":{\"pos\":[0.55,-0.15,0.8],\"enabled\":true}}}";

export const stateTippedRaw = "{\"type\":\"state\",\"t\":1.765,\"joints\":[{\"name\":\"pelvis\",\"pos\":[0.02571,-0.0,0.54721],\"quat\":[0.997065,-0.0,0.076557,0.0]},{\"name\":\"torso\",\"pos\":[0.04403,-0.0,0.6658],\"quat\":[0.991667,-0.0,0.128827,0.0]},{\"name\":\"head\",\"pos\":[0.14623,-0.0,1.05253],\"quat\":[0.987833,-0.0,0.155518,0.0]},{\"name\":\"l_thigh\",\"pos\":[0.02266,0.08,0.52745],\"quat\":[0.999596,0.0,0.028409,-0.0]},{\"name\":\"l_shin\",\"pos\":[0.00891,0.08,0.28584],\"quat\":[0.99983,0.0,0.018412,-0.0]},{\"name\":\"l_foot\",\"pos\":[0.0,0.08,0.044],\"quat\":[1.0,-0.0,0.0,-0.0]},{\"name\":\"r_thigh\",\"pos\":[0.02266,-0.08,0.52745],\"quat\":[0.999596,-0.0,0.028409,0.0]},{\"name\":\"r_shin\",\"pos\":[0.00891,-0.08,0.28584],\"quat\":[0.99983,-0.0,0.018412,0.0]},{\"name\":\"r_foot\",\"pos\":[0.0,-0.08,0.044],\"quat\":[1.0,-0.0,0.0,0.0]},{\"name\":\"l_upper_arm\",\"pos\":[0.12988,0.176,0.99065],\"quat\":[0.989559,0.002684,-0.14408,-0.002658]},{\"name\":\"l_forearm\",\"pos\":[0.19832,0.17709,0.76062],\"quat\":[0.99095,0.00271,-0.134178,-0.002631]},{\"name\":\"r_upper_arm\",\"pos\":[0.12988,-0.176,0.99065],\"quat\":[0.989559,-0.002684,-0.14408,0.002658]},{\"name\":\"r_forearm\",\"pos\":[0.19832,-0.17709,0.76062],\"quat\":[0.99095,-0.00271,-0.134178,0.002631]}],\"com\":[0.082903,-0.0,0.702919],\"delta\":-0.000388049,\"delta_norm\":-0.043619,\"balance\":false,\"ellipse\":{\"center\":[0.02475,0.0,0.0],\"axes\":[0.09432,0.056925],\"angle\":1.570796,\"d\":0.09432},\"contacts\":[[-0.0385,0.0552,0.0],[-0.0385,0.1048,0.0],[0.088,0.0552,0.0],[0.088,0.1048,0.0],[-0.0385,-0.1048,0.0],[-0.0385,-0.0552,0.0],[0.088,-0.1048,0.0],[0.088,-0.0552,0.0]],\"targets\":{\"left_hand\":{\"pos\":[0.55,0.15,0.8],\"enabled\":true},\"right_hand\":{\"pos\":[0.55,-0.15,0.8],\"enabled\":true}}}";

export const errorRaw = "{\"type\":\"error\",\"message\":\"frame is not valid JSON\"}";


function must<T>(frame: T | null, what: string): T {
  if (frame === null) throw new Error(`fixture ${what} failed to parse`);
  return frame;
}

export const hello = must(parseFrame(helloRaw), "hello") as HelloFrame;
export const stateBalanced = must(parseFrame(stateBalancedRaw), "balanced state") as StateFrame;
export const stateTipped = must(parseFrame(stateTippedRaw), "tipped state") as StateFrame;
