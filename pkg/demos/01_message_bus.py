# coding: utf-8

# # The message bus
#
# Nodes talk through named topics. A publisher stamps every message with its own
# sequence number; subscribers hold a bounded queue that drops the oldest message
# when it fills up.

# In[1]:

from drivebridge import Bus

bus = Bus()
camera = bus.register_publisher("camera", "/camera/detections")
planner = bus.register_subscriber("planner", "/camera/detections", queue_capacity=4)
logger = bus.register_subscriber("logger", "/camera/detections", queue_capacity=100)
print(bus.lookup("/camera/detections"))


# Publishing delivers synchronously to every subscriber on the topic.

# In[2]:

for k in range(10):
    camera.publish({"frame": k}, now=k * 0.1)

print("planner kept", [env.payload["frame"] for env in planner.drain()], "dropped", planner.dropped)
print("logger kept", len(logger.drain()), "dropped", logger.dropped)


# Timestamps may not go backwards for a publisher.

# In[3]:

try:
    camera.publish({"frame": -1}, now=0.0)
except ValueError as exc:
    print("rejected:", exc)


# Shutting down a node removes every registration it holds.

# In[4]:

bus.shutdown_node("planner")
print(bus.lookup("/camera/detections"))
