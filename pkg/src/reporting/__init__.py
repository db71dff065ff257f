# csv writers
